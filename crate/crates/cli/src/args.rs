use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "ordent",
    version,
    about = "Entropy experiments and checks for piecewise monotone interval maps"
)]
pub struct Cli {
    /// Worker threads. Reports do not depend on this value.
    #[arg(long, global = true, env = "ORDENT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the builtin maps and their default measures.
    ListMaps(ListMapsArgs),
    /// Entropy estimates over a range of orders.
    #[command(subcommand)]
    Entropy(EntropyCommand),
    /// Verification suites; exit 0 iff every assertion holds.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Build or re-check a tower base.
    #[command(subcommand)]
    Tower(TowerCommand),
    /// Combine partial reports.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Subcommand, Debug)]
pub enum EntropyCommand {
    /// Permutation entropy H(OP_n)/n from sampled orbit windows.
    Pe(PeArgs),
    /// Partition entropy rate of the monotony partition.
    Ks(KsArgs),
}

#[derive(Subcommand, Debug)]
pub enum VerifyCommand {
    /// Exhaustive compatible-pattern count check over all words.
    LemmaSn(LemmaArgs),
    /// h ≤ h_PE ≤ h + ln 2 on a sampled estimate.
    Bounds(BoundsArgs),
    /// Tower base, Q-partition and visit bound.
    Tower(TowerArgs),
}

#[derive(Subcommand, Debug)]
pub enum TowerCommand {
    /// Construct a base and write it out.
    Build(TowerBuildArgs),
    /// Re-check a base written by `tower build`.
    Verify(TowerVerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum ReportCommand {
    /// Merge `entropy pe --histograms` reports over disjoint sample ranges.
    Merge(MergeArgs),
}

#[derive(Args, Debug)]
pub struct ListMapsArgs {
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    /// Builtin map: doubling, tent, logistic or gauss.
    #[arg(long, required_unless_present = "map_file", conflicts_with = "map_file")]
    pub map: Option<String>,
    /// Piecewise-linear map described in JSON.
    #[arg(long)]
    pub map_file: Option<PathBuf>,
    /// Branches kept explicitly by the gauss map.
    #[arg(long)]
    pub gauss_nmax: Option<u32>,
    /// Invariant measure; defaults to the map's own (Lebesgue for custom maps).
    #[arg(long)]
    pub measure: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write PREFIX.json (and PREFIX.csv for tables) instead of JSON on stdout.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogBaseArg {
    E,
    #[value(name = "2")]
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PeEstimatorArg {
    Plugin,
    MillerMadow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KsEstimatorArg {
    Quotient,
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KsModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    ExactSearch,
    FirstReturn,
}

#[derive(Args, Debug)]
pub struct PeArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Order or inclusive range, e.g. `6` or `2..10`.
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    /// First window index, for runs split into mergeable parts.
    #[arg(long, default_value_t = 0)]
    pub offset: u64,
    #[arg(long, value_enum, default_value = "plugin")]
    pub estimator: PeEstimatorArg,
    #[arg(long, value_enum, default_value = "e")]
    pub log_base: LogBaseArg,
    /// Embed the pattern histograms so `report merge` can combine runs.
    #[arg(long)]
    pub histograms: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct KsArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub n: String,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: KsModeArg,
    #[arg(long, value_enum, default_value = "quotient")]
    pub estimator: KsEstimatorArg,
    /// Required in sampled mode.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Required in sampled mode.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cylinders lighter than this are bounded instead of enumerated.
    /// Defaults to 1e-7 for maps with an unresolved tail and 0 otherwise.
    #[arg(long)]
    pub prune_below: Option<f64>,
    #[arg(long, default_value_t = ordent::estimators::DEFAULT_CELL_BUDGET)]
    pub budget: usize,
    #[arg(long, value_enum, default_value = "e")]
    pub log_base: LogBaseArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LemmaArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub nmax: usize,
    #[arg(long, default_value_t = ordent::compat::DEFAULT_WORD_BUDGET)]
    pub budget: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "plugin")]
    pub estimator: PeEstimatorArg,
    /// Reference Kolmogorov-Sinai entropy in nats; defaults to the quadrature oracle.
    #[arg(long)]
    pub hks_ref: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct TowerParams {
    /// Tower height.
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub seed: u64,
    /// Defaults to exact-search for piecewise-linear maps, first-return otherwise.
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
}

#[derive(Args, Debug, Clone)]
pub struct VisitParams {
    /// Window length for the visit-count check.
    #[arg(long, default_value_t = 100)]
    pub visit_n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub visit_windows: u64,
    #[arg(long, default_value_t = ordent::rokhlin::DEFAULT_Q_BUDGET)]
    pub q_budget: usize,
}

#[derive(Args, Debug)]
pub struct TowerArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub tower: TowerParams,
    #[command(flatten)]
    pub visits: VisitParams,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TowerBuildArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub tower: TowerParams,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TowerVerifyArgs {
    /// Report written by `tower build`.
    #[arg(long)]
    pub tower: PathBuf,
    /// Seed for the sampled visit windows.
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub visits: VisitParams,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// Partial reports, in any order.
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}
