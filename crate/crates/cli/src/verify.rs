use ordent::compat::{verify_lemma, CompatError, LemmaSummary, LengthSummary, ReproBundle};
use ordent::estimators::{
    check_bounds, empirical_pattern_distribution, permutation_entropy_estimate, rokhlin_formula_oracle, BoundsReport,
    EntropyEstimate, Estimator, SamplingPlan, MAX_TIE_FRACTION,
};
use ordent::ordinal::MAX_ORDER;
use ordent::InvariantMeasure;
use serde::{Deserialize, Serialize};

use crate::args::{BoundsArgs, LemmaArgs};
use crate::config::{resolve, CliError, MapConfig};
use crate::entropy::{pe_estimator, ORACLE_TOL};
use crate::report::{emit, Report, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub map: MapConfig,
    pub measure: InvariantMeasure,
    pub n_max: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaResults {
    pub summary: Option<LemmaSummary>,
    /// Inputs that reproduce the first failing word.
    pub repro: Option<ReproBundle>,
    pub error: Option<String>,
}

pub fn run_lemma(config: &LemmaConfig) -> Result<Report<LemmaConfig, LemmaResults>, CliError> {
    let map = config.map.build()?;
    let (status, results) = match verify_lemma(&map, &config.measure, config.n_max, config.budget) {
        Ok(s) => {
            let pass = s.max_count_over_bound_ratio <= 1.0 && s.factorization_checked;
            let results = LemmaResults {
                summary: Some(s),
                repro: None,
                error: None,
            };
            (Status::from_pass(pass), results)
        }
        Err(CompatError::Violation(bundle)) => {
            let results = LemmaResults {
                summary: None,
                error: Some(bundle.failure.clone()),
                repro: Some(*bundle),
            };
            (Status::Fail, results)
        }
        Err(e @ CompatError::BudgetExceeded { .. }) => {
            let results = LemmaResults {
                summary: None,
                repro: None,
                error: Some(e.to_string()),
            };
            (Status::Budget, results)
        }
        Err(e @ (CompatError::DepthTooLarge(_) | CompatError::BadLength(_))) => {
            return Err(CliError::Usage(e.to_string()));
        }
        Err(e) => return Err(CliError::Core(e.into())),
    };
    Ok(Report::new("verify lemma-sn", config.clone(), status, results))
}

pub fn cmd_lemma(args: &LemmaArgs) -> Result<u8, CliError> {
    let setup = resolve(&args.map)?;
    let config = LemmaConfig {
        map: setup.map_config,
        measure: setup.measure,
        n_max: args.nmax,
        budget: args.budget,
    };
    let report = run_lemma(&config)?;
    let rows: Vec<LengthSummary> = report
        .results
        .summary
        .as_ref()
        .map(|s| s.per_length.clone())
        .unwrap_or_default();
    emit(&args.output, &report, Some(&rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub map: MapConfig,
    pub measure: InvariantMeasure,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub estimator: Estimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hks_ref: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsResults {
    pub estimate: EntropyEstimate,
    pub hks_ref_source: String,
    pub bounds: BoundsReport,
    pub tie_fraction: f64,
    pub ties_ok: bool,
}

pub fn run_bounds(config: &BoundsConfig) -> Result<Report<BoundsConfig, BoundsResults>, CliError> {
    let map = config.map.build()?;
    let (hks_ref, source) = match config.hks_ref {
        Some(h) => (h, "given"),
        None => match rokhlin_formula_oracle(&map, &config.measure, ORACLE_TOL) {
            Ok(o) => (o.value, "oracle"),
            Err(_) => {
                return Err(CliError::Usage(
                    "no reference entropy for this map and measure; pass --hks-ref".into(),
                ))
            }
        },
    };
    let plan = SamplingPlan {
        seed: config.seed,
        samples: config.samples,
        offset: 0,
    };
    let dist =
        empirical_pattern_distribution(&map, &config.measure, config.n, plan).map_err(|e| CliError::Core(e.into()))?;
    let estimate = permutation_entropy_estimate(&dist, config.estimator).map_err(|e| CliError::Core(e.into()))?;
    let bounds = check_bounds(&estimate, None, hks_ref);
    let tie_fraction = dist.tie_fraction();
    let ties_ok = tie_fraction < MAX_TIE_FRACTION;
    let status = Status::from_pass(bounds.pass && ties_ok);
    let results = BoundsResults {
        estimate,
        hks_ref_source: source.into(),
        bounds,
        tie_fraction,
        ties_ok,
    };
    Ok(Report::new("verify bounds", config.clone(), status, results))
}

pub fn cmd_bounds(args: &BoundsArgs) -> Result<u8, CliError> {
    let setup = resolve(&args.map)?;
    if !(2..=MAX_ORDER).contains(&args.n) {
        return Err(CliError::Usage(format!("--n must lie in 2..={MAX_ORDER}")));
    }
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let config = BoundsConfig {
        map: setup.map_config,
        measure: setup.measure,
        n: args.n,
        samples: args.samples,
        seed: args.seed,
        estimator: pe_estimator(args.estimator),
        hks_ref: args.hks_ref,
    };
    let report = run_bounds(&config)?;
    emit::<_, _, ()>(&args.output, &report, None)
}
