use ordent::estimators::{
    empirical_pattern_distribution, exact_partition_entropies, partition_entropy_rate_sampled,
    permutation_entropy_estimate, rate_from_exact, rokhlin_formula_oracle, EntropyEstimate, Estimator, EstimatorError,
    ExactOptions, Flag, OracleValue, PatternDistribution, SamplingPlan,
};
use ordent::measures::LogBase;
use ordent::ordinal::MAX_ORDER;
use ordent::InvariantMeasure;
use serde::{Deserialize, Serialize};

use crate::args::{KsArgs, KsEstimatorArg, KsModeArg, MergeArgs, PeArgs, PeEstimatorArg};
use crate::config::{log_base, parse_range, resolve, CliError, MapConfig};
use crate::report::{emit, read_json, Report, Status};

/// Default pruning threshold for maps whose partition has an unresolved tail.
pub const TAIL_PRUNE_BELOW: f64 = 1e-7;
/// Requested accuracy of the quadrature oracle.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    pub map: MapConfig,
    pub measure: InvariantMeasure,
    pub n_min: usize,
    pub n_max: usize,
    pub samples: u64,
    pub seed: u64,
    pub offset: u64,
    pub estimator: Estimator,
    pub log_base: LogBase,
    pub histograms: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeEntry {
    pub n: usize,
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub discarded_ties: u64,
    pub tie_fraction: f64,
    pub distinct: u64,
    pub flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PatternDistribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeResults {
    pub rows: Vec<PeEntry>,
}

#[derive(Serialize)]
struct PeRow {
    n: usize,
    value: f64,
    std_error: f64,
    discarded_ties: u64,
    flags: String,
}

pub type PeReport = Report<PeConfig, PeResults>;

pub fn pe_estimator(arg: PeEstimatorArg) -> Estimator {
    match arg {
        PeEstimatorArg::Plugin => Estimator::Plugin,
        PeEstimatorArg::MillerMadow => Estimator::MillerMadow,
    }
}

pub fn flag_names(flags: &[Flag]) -> String {
    flags
        .iter()
        .map(|f| {
            serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn estimate_error(e: EstimatorError) -> CliError {
    match e {
        EstimatorError::BadOrder(_) | EstimatorError::EmptyDistribution => CliError::Usage(e.to_string()),
        other => CliError::Core(other.into()),
    }
}

fn pe_entries(config: &PeConfig, dists: Vec<PatternDistribution>) -> Result<Vec<PeEntry>, CliError> {
    let k = config.log_base.from_nats();
    dists
        .into_iter()
        .map(|dist| {
            let est = permutation_entropy_estimate(&dist, config.estimator).map_err(estimate_error)?;
            Ok(PeEntry {
                n: dist.n,
                value: est.value * k,
                std_error: est.std_error * k,
                samples: est.samples,
                discarded_ties: dist.discarded_ties,
                tie_fraction: dist.tie_fraction(),
                distinct: est.distinct,
                flags: est.flags,
                histogram: config.histograms.then_some(dist),
            })
        })
        .collect()
}

fn emit_pe(report: &PeReport, out: &crate::args::OutputArgs) -> Result<u8, CliError> {
    let rows: Vec<PeRow> = report
        .results
        .rows
        .iter()
        .map(|e| PeRow {
            n: e.n,
            value: e.value,
            std_error: e.std_error,
            discarded_ties: e.discarded_ties,
            flags: flag_names(&e.flags),
        })
        .collect();
    emit(out, report, Some(&rows))
}

pub fn run_pe(config: &PeConfig) -> Result<PeReport, CliError> {
    let map = config.map.build()?;
    let plan = SamplingPlan {
        seed: config.seed,
        samples: config.samples,
        offset: config.offset,
    };
    let dists = (config.n_min..=config.n_max)
        .map(|n| empirical_pattern_distribution(&map, &config.measure, n, plan).map_err(estimate_error))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = pe_entries(config, dists)?;
    Ok(Report::new(
        "entropy pe",
        config.clone(),
        Status::Ok,
        PeResults { rows },
    ))
}

pub fn cmd_pe(args: &PeArgs) -> Result<u8, CliError> {
    let setup = resolve(&args.map)?;
    let (n_min, n_max) = parse_range(&args.n)?;
    if n_min < 2 || n_max > MAX_ORDER {
        return Err(CliError::Usage(format!("pattern orders must lie in 2..={MAX_ORDER}")));
    }
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let config = PeConfig {
        map: setup.map_config,
        measure: setup.measure,
        n_min,
        n_max,
        samples: args.samples,
        seed: args.seed,
        offset: args.offset,
        estimator: pe_estimator(args.estimator),
        log_base: log_base(args.log_base),
        histograms: args.histograms,
    };
    emit_pe(&run_pe(&config)?, &args.output)
}

/// Combines reports over disjoint, contiguous sample ranges into the report
/// a single run over the whole range would have produced.
pub fn merge_pe(mut parts: Vec<PeReport>) -> Result<PeReport, CliError> {
    parts.sort_by_key(|r| r.config.offset);
    let first = &parts[0];
    let mut config = first.config.clone();
    if !config.histograms {
        return Err(CliError::Usage(
            "reports must be written with --histograms to be merged".into(),
        ));
    }
    let mut dists: Vec<PatternDistribution> = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        if part.command != "entropy pe" {
            return Err(CliError::Usage(format!("cannot merge '{}' reports", part.command)));
        }
        let c = &part.config;
        let same = PeConfig {
            samples: config.samples,
            offset: config.offset,
            ..c.clone()
        } == config;
        if !same {
            return Err(CliError::Usage("reports differ in more than their sample range".into()));
        }
        if i > 0 {
            let expected = config.offset + config.samples;
            if c.offset != expected {
                return Err(CliError::Usage(format!(
                    "sample ranges are not contiguous: expected offset {expected}, found {}",
                    c.offset
                )));
            }
            config.samples += c.samples;
        }
        for (k, row) in part.results.rows.iter().enumerate() {
            let h = row
                .histogram
                .as_ref()
                .ok_or_else(|| CliError::Usage("a report row lacks its histogram".into()))?;
            if i == 0 {
                dists.push(h.clone());
            } else {
                dists[k].merge(h).map_err(estimate_error)?;
            }
        }
    }
    let rows = pe_entries(&config, dists)?;
    Ok(Report::new("entropy pe", config, Status::Ok, PeResults { rows }))
}

pub fn cmd_merge(args: &MergeArgs) -> Result<u8, CliError> {
    let parts = args
        .inputs
        .iter()
        .map(|p| read_json::<PeReport>(p))
        .collect::<Result<Vec<_>, _>>()?;
    emit_pe(&merge_pe(parts)?, &args.output)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsMode {
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsConfig {
    pub map: MapConfig,
    pub measure: InvariantMeasure,
    pub partition: String,
    pub n_min: usize,
    pub n_max: usize,
    pub mode: KsMode,
    pub estimator: Estimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub prune_below: f64,
    pub budget: usize,
    pub log_base: LogBase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub n: usize,
    pub value: f64,
    pub std_error: f64,
    pub tail_bound: f64,
    pub cells: u64,
    pub oracle: Option<f64>,
    pub flags: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResults {
    pub rows: Vec<KsRow>,
    pub oracle: Option<OracleValue>,
    pub error: Option<String>,
}

fn ks_row(e: &EntropyEstimate, oracle: Option<f64>, k: f64) -> KsRow {
    KsRow {
        n: e.n,
        value: e.value * k,
        std_error: e.std_error * k,
        tail_bound: e.tail_bound * k,
        cells: e.distinct,
        oracle: oracle.map(|o| o * k),
        flags: flag_names(&e.flags),
    }
}

pub fn run_ks(config: &KsConfig) -> Result<Report<KsConfig, KsResults>, CliError> {
    let map = config.map.build()?;
    let mu = &config.measure;
    let p = map.monotony_partition();
    let k = config.log_base.from_nats();
    // custom maps and foreign measures have no reference value
    let oracle = rokhlin_formula_oracle(&map, mu, ORACLE_TOL).ok();
    let reference = oracle.map(|o| o.value);
    let mut rows = Vec::new();
    let mut error = None;
    match config.mode {
        KsMode::Exact => {
            let opts = ExactOptions {
                budget: config.budget,
                prune_below: config.prune_below,
            };
            let hs = match exact_partition_entropies(&map, mu, p, config.n_max, opts) {
                Ok(hs) => hs,
                Err(EstimatorError::CellExplosion { depth, budget }) => {
                    error = Some(EstimatorError::CellExplosion { depth, budget }.to_string());
                    if depth > 1 {
                        exact_partition_entropies(&map, mu, p, depth - 1, opts).map_err(estimate_error)?
                    } else {
                        Vec::new()
                    }
                }
                Err(e) => return Err(estimate_error(e)),
            };
            for n in config.n_min..=config.n_max.min(hs.len()) {
                rows.push(ks_row(&rate_from_exact(&hs, n, config.estimator), reference, k));
            }
        }
        KsMode::Sampled => {
            let plan = SamplingPlan {
                seed: config.seed.expect("validated"),
                samples: config.samples.expect("validated"),
                offset: 0,
            };
            for n in config.n_min..=config.n_max {
                let e =
                    partition_entropy_rate_sampled(&map, mu, p, n, config.estimator, plan).map_err(estimate_error)?;
                rows.push(ks_row(&e, reference, k));
            }
        }
    }
    let status = if error.is_some() { Status::Budget } else { Status::Ok };
    Ok(Report::new(
        "entropy ks",
        config.clone(),
        status,
        KsResults { rows, oracle, error },
    ))
}

pub fn cmd_ks(args: &KsArgs) -> Result<u8, CliError> {
    let setup = resolve(&args.map)?;
    let (n_min, n_max) = parse_range(&args.n)?;
    let mode = match args.mode {
        KsModeArg::Exact => KsMode::Exact,
        KsModeArg::Sampled => KsMode::Sampled,
    };
    if mode == KsMode::Sampled {
        if args.seed.is_none() {
            return Err(CliError::Usage("sampled mode needs --seed".into()));
        }
        if args.samples.is_none_or(|s| s == 0) {
            return Err(CliError::Usage("sampled mode needs a positive --samples".into()));
        }
    }
    let tail = setup.map.monotony_partition().tail().is_some();
    let prune_below = args.prune_below.unwrap_or(if tail { TAIL_PRUNE_BELOW } else { 0.0 });
    let config = KsConfig {
        map: setup.map_config,
        measure: setup.measure,
        partition: "monotony".into(),
        n_min,
        n_max,
        mode,
        estimator: match args.estimator {
            KsEstimatorArg::Quotient => Estimator::Quotient,
            KsEstimatorArg::Difference => Estimator::Difference,
        },
        samples: args.samples.filter(|_| mode == KsMode::Sampled),
        seed: args.seed.filter(|_| mode == KsMode::Sampled),
        prune_below,
        budget: args.budget,
        log_base: log_base(args.log_base),
    };
    let report = run_ks(&config)?;
    emit(&args.output, &report, Some(&report.results.rows))
}
