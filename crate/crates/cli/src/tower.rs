use ordent::interval::union_from_json;
use ordent::rokhlin::{
    build_base, build_q_partition, tower_overlap, verify_q_partition, visit_bound_check, CheckKind, QReport,
    RokhlinError, RokhlinTower, Strategy, VisitReport,
};
use ordent::{IntervalUnion, InvariantMeasure, PiecewiseMonotoneMap};
use serde::{Deserialize, Serialize};

use crate::args::{StrategyArg, TowerArgs, TowerBuildArgs, TowerParams, TowerVerifyArgs, VisitParams};
use crate::config::{resolve, CliError, MapConfig, Setup};
use crate::report::{emit, read_json, Report, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerConfig {
    pub map: MapConfig,
    pub measure: InvariantMeasure,
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitConfig {
    pub visit_n: usize,
    pub visit_windows: u64,
    pub q_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerChecks {
    pub base_measure: f64,
    /// `(1 − ε)/d`.
    pub target: f64,
    pub measure_ok: bool,
    pub check: CheckKind,
    /// Largest overlap of two floors, from exact preimages.
    pub exact_overlap: f64,
    /// Sampled 99% bound, for bases whose disjointness is checked statistically.
    pub overlap_bound: Option<f64>,
    pub disjoint_ok: bool,
    pub q_cells: Option<usize>,
    pub q_report: Option<QReport>,
    pub visits: VisitReport,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerResults {
    pub tower: Option<serde_json::Value>,
    pub checks: Option<TowerChecks>,
    pub error: Option<String>,
}

fn tower_config(setup: Setup, p: &TowerParams) -> TowerConfig {
    let strategy = match p.strategy {
        Some(StrategyArg::ExactSearch) => Strategy::ExactSearch,
        Some(StrategyArg::FirstReturn) => Strategy::FirstReturn,
        None if setup.map.is_piecewise_linear() => Strategy::ExactSearch,
        None => Strategy::FirstReturn,
    };
    TowerConfig {
        map: setup.map_config,
        measure: setup.measure,
        d: p.d,
        eps: p.eps,
        seed: p.seed,
        strategy,
    }
}

fn visit_config(v: &VisitParams) -> VisitConfig {
    VisitConfig {
        visit_n: v.visit_n,
        visit_windows: v.visit_windows,
        q_budget: v.q_budget,
    }
}

/// Build failures that still deserve a report, as opposed to bad input.
fn build(map: &PiecewiseMonotoneMap, c: &TowerConfig) -> Result<Result<RokhlinTower, (Status, String)>, CliError> {
    match build_base(map, &c.measure, c.d, c.eps, c.strategy, c.seed) {
        Ok(t) => Ok(Ok(t)),
        Err(e @ RokhlinError::SearchExhausted { .. }) => Ok(Err((Status::Fail, e.to_string()))),
        Err(e @ (RokhlinError::CellExplosion { .. } | RokhlinError::BudgetExceeded { .. })) => {
            Ok(Err((Status::Budget, e.to_string())))
        }
        Err(e @ (RokhlinError::BadHeight(_) | RokhlinError::BadEpsilon(_) | RokhlinError::Unsupported(_))) => {
            Err(CliError::Usage(e.to_string()))
        }
        Err(e) => Err(CliError::Core(e.into())),
    }
}

/// Runs every tower assertion on `base`. Exactly checked bases must have
/// null floor overlaps; sampled ones must keep the overlap bound below `ε/d`.
#[allow(clippy::too_many_arguments)]
fn check_tower(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    base: &IntervalUnion,
    d: usize,
    eps: f64,
    check: CheckKind,
    overlap_bound: Option<f64>,
    visits: &VisitConfig,
    seed: u64,
) -> Result<(TowerChecks, Status), CliError> {
    let base_measure = mu.measure_of(base);
    let target = (1.0 - eps) / d as f64;
    let measure_ok = base_measure >= target;
    let exact_overlap = tower_overlap(map, base, d);
    let disjoint_ok = match (check, overlap_bound) {
        (CheckKind::Statistical, Some(b)) => b <= eps / d as f64,
        _ => exact_overlap == 0.0,
    };
    let visit = visit_bound_check(map, mu, base, d, visits.visit_n, visits.visit_windows, seed);
    let (q_cells, q_report, error, budget_hit) = match build_q_partition(map, mu, base.cells(), d, eps, visits.q_budget)
    {
        Ok(q) => (Some(q.cells.len()), Some(verify_q_partition(map, mu, &q)), None, false),
        Err(e @ (RokhlinError::CellExplosion { .. } | RokhlinError::BudgetExceeded { .. })) => {
            (None, None, Some(e.to_string()), true)
        }
        Err(e @ RokhlinError::Unsupported(_)) => (None, None, Some(e.to_string()), false),
        Err(e) => return Err(CliError::Core(e.into())),
    };
    let pass = measure_ok && disjoint_ok && q_report.as_ref().is_some_and(|q| q.pass) && visit.violations == 0;
    let status = if budget_hit {
        Status::Budget
    } else {
        Status::from_pass(pass)
    };
    let checks = TowerChecks {
        base_measure,
        target,
        measure_ok,
        check,
        exact_overlap,
        overlap_bound,
        disjoint_ok,
        q_cells,
        q_report,
        visits: visit,
        error,
    };
    Ok((checks, status))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyTowerConfig {
    #[serde(flatten)]
    pub tower: TowerConfig,
    #[serde(flatten)]
    pub visits: VisitConfig,
}

pub fn run_verify_tower(config: &VerifyTowerConfig) -> Result<Report<VerifyTowerConfig, TowerResults>, CliError> {
    let c = &config.tower;
    let map = c.map.build()?;
    let (status, results) = match build(&map, c)? {
        Ok(t) => {
            let (checks, status) = check_tower(
                &map,
                &c.measure,
                &t.base,
                c.d,
                c.eps,
                t.check,
                t.overlap_bound,
                &config.visits,
                c.seed,
            )?;
            let results = TowerResults {
                tower: Some(t.to_json()),
                checks: Some(checks),
                error: None,
            };
            (status, results)
        }
        Err((status, msg)) => (
            status,
            TowerResults {
                tower: None,
                checks: None,
                error: Some(msg),
            },
        ),
    };
    Ok(Report::new("verify tower", config.clone(), status, results))
}

pub fn cmd_verify_tower(args: &TowerArgs) -> Result<u8, CliError> {
    let config = VerifyTowerConfig {
        tower: tower_config(resolve(&args.map)?, &args.tower),
        visits: visit_config(&args.visits),
    };
    emit::<_, _, ()>(&args.output, &run_verify_tower(&config)?, None)
}

pub type BuildReport = Report<TowerConfig, TowerResults>;

pub fn run_build(config: &TowerConfig) -> Result<BuildReport, CliError> {
    let map = config.map.build()?;
    let (status, results) = match build(&map, config)? {
        Ok(t) => (
            Status::Ok,
            TowerResults {
                tower: Some(t.to_json()),
                checks: None,
                error: None,
            },
        ),
        Err((status, msg)) => (
            status,
            TowerResults {
                tower: None,
                checks: None,
                error: Some(msg),
            },
        ),
    };
    Ok(Report::new("tower build", config.clone(), status, results))
}

pub fn cmd_build(args: &TowerBuildArgs) -> Result<u8, CliError> {
    let config = tower_config(resolve(&args.map)?, &args.tower);
    emit::<_, _, ()>(&args.output, &run_build(&config)?, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverifyConfig {
    /// Configuration the base was built with.
    pub built: TowerConfig,
    pub seed: u64,
    #[serde(flatten)]
    pub visits: VisitConfig,
}

pub fn run_reverify(
    built: &BuildReport,
    seed: u64,
    visits: VisitConfig,
) -> Result<Report<ReverifyConfig, TowerResults>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("not a tower build report: {what}"));
    if built.command != "tower build" {
        return Err(bad("wrong command"));
    }
    let tower = built.results.tower.as_ref().ok_or_else(|| bad("no tower in results"))?;
    let base = union_from_json(&tower["base"]).map_err(|e| bad(&e.to_string()))?;
    let check: CheckKind = serde_json::from_value(tower["check"].clone()).map_err(|_| bad("missing check kind"))?;
    let overlap_bound = tower["overlap_bound"].as_f64();
    let c = &built.config;
    let map = c.map.build()?;
    let (checks, status) = check_tower(&map, &c.measure, &base, c.d, c.eps, check, overlap_bound, &visits, seed)?;
    let config = ReverifyConfig {
        built: c.clone(),
        seed,
        visits,
    };
    let results = TowerResults {
        tower: Some(tower.clone()),
        checks: Some(checks),
        error: None,
    };
    Ok(Report::new("tower verify", config, status, results))
}

pub fn cmd_reverify(args: &TowerVerifyArgs) -> Result<u8, CliError> {
    let built: BuildReport = read_json(&args.tower)?;
    let report = run_reverify(&built, args.seed, visit_config(&args.visits))?;
    emit::<_, _, ()>(&args.output, &report, None)
}
