use std::fs;

use ordent::maps::{CustomSpec, MapError, DEFAULT_GAUSS_N_MAX};
use ordent::measures::LogBase;
use ordent::{Builtin, InvariantMeasure, PiecewiseMonotoneMap};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::args::{LogBaseArg, MapArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] ordent::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_budget() => 3,
            _ => 1,
        }
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        CliError::Core(e.into())
    }
}

/// Map description as embedded in reports. A custom map carries its full
/// piece list so the report is self-contained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CustomSpec>,
}

impl MapConfig {
    pub fn build(&self) -> Result<PiecewiseMonotoneMap, CliError> {
        Ok(match &self.spec {
            Some(spec) => PiecewiseMonotoneMap::from_spec(spec)?,
            None => PiecewiseMonotoneMap::by_name(&self.name, self.n_max)?,
        })
    }
}

/// A resolved map together with its measure and their report form.
pub struct Setup {
    pub map_config: MapConfig,
    pub map: PiecewiseMonotoneMap,
    pub measure: InvariantMeasure,
}

pub fn resolve(args: &MapArgs) -> Result<Setup, CliError> {
    let map_config = match (&args.map, &args.map_file) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let spec: CustomSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("malformed map file {}: {e}", path.display())))?;
            MapConfig {
                name: spec.name.clone().unwrap_or_else(|| "custom".into()),
                n_max: None,
                spec: Some(spec),
            }
        }
        (Some(name), None) => {
            let builtin = Builtin::from_name(name, args.gauss_nmax).map_err(|e| CliError::Usage(e.to_string()))?;
            let n_max = match builtin {
                Builtin::Gauss { n_max } => Some(n_max),
                _ if args.gauss_nmax.is_some() => {
                    return Err(CliError::Usage("--gauss-nmax applies to the gauss map only".into()));
                }
                _ => None,
            };
            MapConfig {
                name: builtin.name().to_string(),
                n_max,
                spec: None,
            }
        }
        (None, None) => return Err(CliError::Usage("one of --map or --map-file is required".into())),
    };
    let map = map_config.build()?;
    let measure = resolve_measure(&map, args.measure.as_deref())?;
    Ok(Setup {
        map_config,
        map,
        measure,
    })
}

fn resolve_measure(map: &PiecewiseMonotoneMap, name: Option<&str>) -> Result<InvariantMeasure, CliError> {
    let domain = map.domain();
    let own_lebesgue = InvariantMeasure::Lebesgue {
        lo: domain.lo(),
        hi: domain.hi(),
    };
    match name {
        None => Ok(map.builtin_kind().map_or(own_lebesgue, |b| b.invariant_measure())),
        Some("lebesgue") => Ok(own_lebesgue),
        Some(other) => {
            let m = InvariantMeasure::from_name(other).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown measure '{other}' (expected one of {})",
                    InvariantMeasure::NAMES.join(", ")
                ))
            })?;
            if domain.lo() != 0.0 || domain.hi() != 1.0 {
                return Err(CliError::Usage(format!("measure '{other}' lives on [0, 1]")));
            }
            Ok(m)
        }
    }
}

/// Parses `6`, `2..10` or `2..=10`; ranges are inclusive.
pub fn parse_range(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("bad order range '{s}' (expected N or A..B)"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn log_base(arg: LogBaseArg) -> LogBase {
    match arg {
        LogBaseArg::E => LogBase::E,
        LogBaseArg::Two => LogBase::Two,
    }
}

pub fn gauss_default_n_max() -> u32 {
    DEFAULT_GAUSS_N_MAX
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..10").unwrap(), (2, 10));
        assert_eq!(parse_range("2..=10").unwrap(), (2, 10));
        assert_eq!(parse_range("7").unwrap(), (7, 7));
        assert!(parse_range("10..2").is_err());
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("a..3").is_err());
    }
}
