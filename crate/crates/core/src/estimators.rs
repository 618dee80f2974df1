//! Entropy estimators.
//!
//! * Permutation entropy `H(OP_n)/n` from sampled windows
//!   `(ω, Tω, …, T^{n-1}ω)` with `ω ~ μ` drawn fresh for every window.
//! * Partition entropy rates `H(P^(n))/n` and `H(P^(n)) − H(P^(n-1))`,
//!   either exactly from cylinder measures or from sampled coded words.
//! * `∫ log|T'| dμ` by double-exponential quadrature as an independent
//!   reference for the Kolmogorov-Sinai entropy of the builtin maps.
//!
//! Sample `i` always lands in jackknife block `i % 16`, so histograms from
//! disjoint index ranges merge into exactly the single-run histogram.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::LN_2;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{Interval, IntervalPartition};
use crate::maps::{Builtin, MapError, PiecewiseMonotoneMap};
use crate::measures::{neumaier, phi, EntropyValue, InvariantMeasure, LogBase};
use crate::ordinal::{window_rank, MAX_ORDER};
use crate::rng::{streams, CounterRng};

pub const JACKKNIFE_BLOCKS: usize = 16;
/// Default cylinder budget for exact partition entropies.
pub const DEFAULT_CELL_BUDGET: usize = 10_000_000;
/// Estimates with more distinct outcomes than `total / UNDERSAMPLED_RATIO`
/// are flagged.
pub const UNDERSAMPLED_RATIO: u64 = 10;
/// Largest tolerated share of tie-discarded windows.
pub const MAX_TIE_FRACTION: f64 = 1e-3;

const CHUNK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("cannot merge distributions of order {0} and {1}")]
    OrderMismatch(usize, usize),
    #[error("pattern order {0} unsupported (need 2 ≤ n ≤ {MAX_ORDER})")]
    BadOrder(usize),
    #[error("refinement at depth {depth} needs more than {budget} cells")]
    CellExplosion { depth: usize, budget: usize },
    #[error("no quadrature oracle for map '{0}'")]
    UnsupportedMap(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Plugin,
    MillerMadow,
    Quotient,
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// More distinct outcomes than a tenth of the samples.
    Undersampled,
    /// Tie-discarded windows above 0.1%.
    ExcessTies,
    /// Too few nonempty jackknife blocks for an error bar.
    NoErrorBar,
    /// Words were keyed by a 128-bit hash rather than exactly.
    HashedWords,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Nats per step.
    pub value: f64,
    pub n: usize,
    pub samples: u64,
    pub std_error: f64,
    pub estimator: Estimator,
    pub tail_bound: f64,
    pub distinct: u64,
    pub flags: Vec<Flag>,
}

impl EntropyEstimate {
    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Pattern histogram split into jackknife blocks by sample index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternDistribution {
    pub n: usize,
    pub total: u64,
    pub discarded_ties: u64,
    blocks: Vec<BTreeMap<u64, u64>>,
}

impl PatternDistribution {
    pub fn empty(n: usize) -> Self {
        PatternDistribution {
            n,
            total: 0,
            discarded_ties: 0,
            blocks: vec![BTreeMap::new(); JACKKNIFE_BLOCKS],
        }
    }

    /// Adds one window outcome; `None` is a tie-discarded window.
    pub fn record(&mut self, index: u64, rank: Option<u64>) {
        match rank {
            Some(r) => {
                *self.blocks[(index % JACKKNIFE_BLOCKS as u64) as usize]
                    .entry(r)
                    .or_insert(0) += 1;
                self.total += 1;
            }
            None => self.discarded_ties += 1,
        }
    }

    pub fn merge(&mut self, other: &PatternDistribution) -> Result<(), EstimatorError> {
        if self.n != other.n {
            return Err(EstimatorError::OrderMismatch(self.n, other.n));
        }
        for (mine, theirs) in self.blocks.iter_mut().zip(&other.blocks) {
            for (&k, &c) in theirs {
                *mine.entry(k).or_insert(0) += c;
            }
        }
        self.total += other.total;
        self.discarded_ties += other.discarded_ties;
        Ok(())
    }

    /// Counts per pattern rank across all blocks.
    pub fn counts(&self) -> BTreeMap<u64, u64> {
        merge_blocks(&self.blocks)
    }

    pub fn blocks(&self) -> &[BTreeMap<u64, u64>] {
        &self.blocks
    }

    pub fn distinct(&self) -> u64 {
        self.counts().len() as u64
    }

    pub fn windows(&self) -> u64 {
        self.total + self.discarded_ties
    }

    pub fn tie_fraction(&self) -> f64 {
        if self.windows() == 0 {
            0.0
        } else {
            self.discarded_ties as f64 / self.windows() as f64
        }
    }
}

fn merge_blocks<K: Ord + Clone>(blocks: &[BTreeMap<K, u64>]) -> BTreeMap<K, u64> {
    let mut all = BTreeMap::new();
    for b in blocks {
        for (k, &c) in b {
            *all.entry(k.clone()).or_insert(0) += c;
        }
    }
    all
}

/// Plugin entropy from counts, `ln N − Σ c ln c / N`.
fn plugin(sum_clnc: f64, total: f64) -> f64 {
    (total.ln() - sum_clnc / total).max(0.0)
}

fn clnc(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        let c = c as f64;
        c * c.ln()
    }
}

/// Entropy (nats, not divided by order), jackknife standard error, distinct count.
fn block_entropy<K: Ord + Clone>(blocks: &[BTreeMap<K, u64>], miller_madow: bool) -> (f64, f64, u64, bool) {
    let all = merge_blocks(blocks);
    let total: u64 = all.values().sum();
    let n = total as f64;
    let s = neumaier(all.values().map(|&c| clnc(c)));
    let k = all.len() as f64;
    let correct = |h: f64, k: f64, n: f64| if miller_madow { h + (k - 1.0) / (2.0 * n) } else { h };
    let h = correct(plugin(s, n), k, n);
    let mut leave_out = Vec::new();
    for b in blocks {
        let nb: u64 = b.values().sum();
        if nb == 0 || nb == total {
            continue;
        }
        let mut s_minus = s;
        let mut k_minus = k;
        for (key, &cb) in b {
            let c = all[key];
            s_minus += clnc(c - cb) - clnc(c);
            if c == cb {
                k_minus -= 1.0;
            }
        }
        let rest = (total - nb) as f64;
        leave_out.push(correct(plugin(s_minus, rest), k_minus, rest));
    }
    let g = leave_out.len();
    if g < 2 {
        return (h, 0.0, all.len() as u64, false);
    }
    let mean = leave_out.iter().sum::<f64>() / g as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (g as f64 - 1.0) / g as f64;
    (h, var.sqrt(), all.len() as u64, true)
}

/// How a window of length `n` is drawn for a given map and measure.
#[derive(Clone, Copy, Debug)]
struct WindowSource {
    exact_dyadic: bool,
    words: u64,
}

impl WindowSource {
    fn new(map: &PiecewiseMonotoneMap, mu: &InvariantMeasure, n: usize) -> Self {
        let exact_dyadic =
            matches!(map.builtin_kind(), Some(Builtin::Doubling | Builtin::Tent)) && mu.is_unit_lebesgue();
        WindowSource {
            exact_dyadic,
            words: if exact_dyadic {
                PiecewiseMonotoneMap::dyadic_words(n)
            } else {
                1
            },
        }
    }

    fn fill(
        &self,
        map: &PiecewiseMonotoneMap,
        mu: &InvariantMeasure,
        rng: &mut CounterRng,
        out: &mut [f64],
    ) -> Result<(), MapError> {
        if self.exact_dyadic {
            map.dyadic_window(rng, out);
            Ok(())
        } else {
            map.orbit_window(mu.quantile(rng.uniform()), out)
        }
    }
}

/// Which window indices to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    pub samples: u64,
    /// First sample index; disjoint offsets give mergeable partial runs.
    #[serde(default)]
    pub offset: u64,
}

/// Runs `f(index, rng)` over all indices in parallel chunks, each chunk
/// reading its own counter range, and returns results in index order.
fn map_indices<T, F>(plan: SamplingPlan, stream: u64, words: u64, f: F) -> Result<Vec<T>, MapError>
where
    T: Send,
    F: Fn(u64, &mut CounterRng) -> Result<T, MapError> + Sync,
{
    let chunks = plan.samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<T>, MapError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = plan.offset + c * CHUNK;
            let end = (plan.offset + plan.samples).min(start + CHUNK);
            let mut rng = CounterRng::at(plan.seed, stream, start, words);
            (start..end).map(|i| f(i, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(plan.samples as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Histogram of ordinal patterns of order `n` over `plan.samples` windows.
pub fn empirical_pattern_distribution(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    n: usize,
    plan: SamplingPlan,
) -> Result<PatternDistribution, EstimatorError> {
    if !(2..=MAX_ORDER).contains(&n) {
        return Err(EstimatorError::BadOrder(n));
    }
    let src = WindowSource::new(map, mu, n);
    let ranks = map_indices(plan, streams::PATTERN_WINDOWS, src.words, |_, rng| {
        let mut w = [0.0f64; MAX_ORDER];
        src.fill(map, mu, rng, &mut w[..n])?;
        Ok(window_rank(&w[..n]))
    })?;
    let mut dist = PatternDistribution::empty(n);
    for (k, r) in ranks.into_iter().enumerate() {
        dist.record(plan.offset + k as u64, r);
    }
    Ok(dist)
}

/// `H(OP_n)/n` from a pattern histogram, with a 16-block jackknife error.
pub fn permutation_entropy_estimate(
    dist: &PatternDistribution,
    estimator: Estimator,
) -> Result<EntropyEstimate, EstimatorError> {
    if dist.total == 0 {
        return Err(EstimatorError::EmptyDistribution);
    }
    let (h, se, distinct, has_bar) = block_entropy(&dist.blocks, estimator == Estimator::MillerMadow);
    let order = dist.n as f64;
    let mut flags = Vec::new();
    if distinct > dist.total / UNDERSAMPLED_RATIO {
        flags.push(Flag::Undersampled);
    }
    if dist.tie_fraction() > MAX_TIE_FRACTION {
        flags.push(Flag::ExcessTies);
    }
    if !has_bar {
        flags.push(Flag::NoErrorBar);
    }
    Ok(EntropyEstimate {
        value: h / order,
        n: dist.n,
        samples: dist.total,
        std_error: se / order,
        estimator,
        tail_bound: 0.0,
        distinct,
        flags,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactOptions {
    pub budget: usize,
    /// Cylinders lighter than this are dropped into the unresolved remainder.
    pub prune_below: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            budget: DEFAULT_CELL_BUDGET,
            prune_below: 0.0,
        }
    }
}

/// Upper bound on `Σ_A φ(μ(A ∩ U))` over the cells `A` of a partition with
/// masses `masses` (plus a tail of known entropy bound), for any set `U` of
/// mass at most `m`. Concavity of `φ` gives the water-filling optimum
/// `x_A = min(μ(A), λ)` with `λ ≤ 1/e`.
fn water_fill(masses: &[f64], tail_entropy: f64, m: f64) -> f64 {
    let filled = |lam: f64| masses.iter().map(|&a| a.min(lam)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, std::f64::consts::E.recip());
    if filled(hi) <= m {
        lo = hi;
    } else {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if filled(mid) <= m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    masses.iter().map(|&a| phi(a.min(lo))).sum::<f64>() + tail_entropy
}

/// Bound on the entropy hidden in an unresolved union `U` of `P^(n)` cells
/// with `μ(U) ≤ m`, by conditional subadditivity over the `n` factors
/// `T^{-k}P`, each of which has the cell masses of `P`.
fn unresolved_bound(masses: &[f64], tail_entropy: f64, m: f64, n: usize) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    let w = water_fill(masses, tail_entropy, m);
    phi(m) + n as f64 * (w - phi(m)).max(0.0)
}

/// Cell masses of `P` and the entropy allowance of its tail.
fn partition_profile(mu: &InvariantMeasure, p: &IntervalPartition) -> (Vec<f64>, f64) {
    let mut masses: Vec<f64> = p.cells().iter().map(|c| mu.measure_interval(&c.interval)).collect();
    let mut tail_entropy = 0.0;
    if let Some(t) = p.tail() {
        match t.entropy_bound {
            Some(e) => tail_entropy = e,
            None => masses.push(t.measure_bound),
        }
    }
    (masses, tail_entropy)
}

/// `H(P^(k))` for `k = 1..=n_max`, computed from exact cylinder measures.
///
/// `P^(k+1) = P ∨ T^{-1}P^(k)` is built branch by branch; every piece is an
/// interval and pieces are grouped into cells by their label word. Cells
/// behind the partition's tail or below `prune_below` are not enumerated;
/// their entropy is covered by each value's `tail_bound`.
pub fn exact_partition_entropies(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    p: &IntervalPartition,
    n_max: usize,
    opts: ExactOptions,
) -> Result<Vec<EntropyValue>, EstimatorError> {
    let (masses, tail_entropy) = partition_profile(mu, p);
    let total_mass = mu.measure_interval(&p.domain());
    let structural_tail = p.tail().is_some() || map.tail().is_some();
    let mut pieces: Vec<(Interval, u32)> = Vec::new();
    let mut word_mass: Vec<f64> = Vec::new();
    for c in p.cells() {
        let m = mu.measure_interval(&c.interval);
        if m > 0.0 {
            pieces.push((c.interval, word_mass.len() as u32));
            word_mass.push(m);
        }
    }
    let mut out = Vec::with_capacity(n_max);
    let mut pruned = 0.0;
    for depth in 1..=n_max {
        if depth > 1 {
            let (next, masses_next) = refine_level(map, mu, p, &pieces, opts, depth)?;
            pieces = next;
            word_mass = masses_next;
        }
        if opts.prune_below > 0.0 {
            let keep: Vec<bool> = word_mass.iter().map(|&m| m >= opts.prune_below).collect();
            pruned += word_mass
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| !k)
                .map(|(m, _)| m)
                .sum::<f64>();
            let mut remap = vec![u32::MAX; word_mass.len()];
            let mut kept_mass = Vec::new();
            for (w, &k) in keep.iter().enumerate() {
                if k {
                    remap[w] = kept_mass.len() as u32;
                    kept_mass.push(word_mass[w]);
                }
            }
            pieces.retain_mut(|(_, w)| {
                *w = remap[*w as usize];
                *w != u32::MAX
            });
            word_mass = kept_mass;
        }
        let value = neumaier(word_mass.iter().map(|&m| phi(m)));
        let resolved = neumaier(word_mass.iter().copied());
        let missing = if structural_tail || opts.prune_below > 0.0 {
            // rounding allowance proportional to the number of summed cells
            (total_mass - resolved).max(pruned).max(0.0) + 1e-15 * word_mass.len() as f64
        } else {
            0.0
        };
        out.push(EntropyValue {
            value,
            tail_bound: unresolved_bound(&masses, tail_entropy, missing, depth),
            cells: word_mass.len(),
            log_base: LogBase::E,
        });
    }
    Ok(out)
}

type Level = (Vec<(Interval, u32)>, Vec<f64>);

fn refine_level(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    p: &IntervalPartition,
    pieces: &[(Interval, u32)],
    opts: ExactOptions,
    depth: usize,
) -> Result<Level, EstimatorError> {
    // pieces sorted by position so each branch only scans its range
    let mut sorted: Vec<(Interval, u32)> = pieces.to_vec();
    sorted.sort_by(|a, b| a.0.lo().total_cmp(&b.0.lo()));
    let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
    let mut next: Vec<(Interval, u32)> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for b in map.branches() {
        let range = b.range();
        if range.is_empty() || b.domain().length() == 0.0 {
            continue;
        }
        let start = sorted.partition_point(|(c, _)| c.hi() < range.lo());
        for (c, w) in sorted[start..].iter().take_while(|(c, _)| c.lo() <= range.hi()) {
            let q = b.preimage(c);
            if q.length() == 0.0 {
                continue;
            }
            // split the preimage along P
            let first = p.cells().partition_point(|cell| cell.interval.hi() < q.lo());
            for (i, cell) in p.cells().iter().enumerate().skip(first) {
                if cell.interval.lo() > q.hi() {
                    break;
                }
                let piece = q.intersect(&cell.interval);
                let m = mu.measure_interval(&piece);
                // pieces below the pruning threshold fall into the unresolved mass
                if m <= 0.0 || m < opts.prune_below {
                    continue;
                }
                let id = *ids.entry((i as u32, *w)).or_insert_with(|| {
                    mass.push(0.0);
                    (mass.len() - 1) as u32
                });
                mass[id as usize] += m;
                next.push((piece, id));
                if next.len() > opts.budget {
                    return Err(EstimatorError::CellExplosion {
                        depth,
                        budget: opts.budget,
                    });
                }
            }
        }
    }
    Ok((next, mass))
}

/// Exact `H(P^(n))/n` or `H(P^(n)) − H(P^(n-1))`.
pub fn partition_entropy_rate_exact(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    p: &IntervalPartition,
    n: usize,
    estimator: Estimator,
    opts: ExactOptions,
) -> Result<EntropyEstimate, EstimatorError> {
    let hs = exact_partition_entropies(map, mu, p, n.max(1), opts)?;
    Ok(rate_from_exact(&hs, n, estimator))
}

/// Rate estimate at depth `n` from the output of [`exact_partition_entropies`].
pub fn rate_from_exact(hs: &[EntropyValue], n: usize, estimator: Estimator) -> EntropyEstimate {
    let cur = hs[n - 1];
    let (value, tail_bound) = match estimator {
        Estimator::Difference if n > 1 => (cur.value - hs[n - 2].value, cur.tail_bound + hs[n - 2].tail_bound),
        Estimator::Difference => (cur.value, cur.tail_bound),
        _ => (cur.value / n as f64, cur.tail_bound / n as f64),
    };
    EntropyEstimate {
        value,
        n,
        samples: 0,
        std_error: 0.0,
        estimator,
        tail_bound,
        distinct: cur.cells as u64,
        flags: Vec::new(),
    }
}

/// Coded-word histograms for `P^(n)` and `P^(n-1)` from sampled windows.
pub fn partition_entropy_rate_sampled(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    p: &IntervalPartition,
    n: usize,
    estimator: Estimator,
    plan: SamplingPlan,
) -> Result<EntropyEstimate, EstimatorError> {
    if n == 0 {
        return Err(EstimatorError::BadOrder(n));
    }
    let alphabet = p.len() as u128 + 1;
    let exact_keys = (alphabet as f64).log2() * n as f64 <= 127.0;
    let tail_code = p.len() as u128;
    let src = WindowSource::new(map, mu, n);
    let words = map_indices(plan, streams::KS_WORDS, src.words, |_, rng| {
        let mut w = vec![0.0f64; n];
        src.fill(map, mu, rng, &mut w)?;
        let codes: Vec<u128> = w
            .iter()
            .map(|&x| p.locate(x).map_or(tail_code, |i| i as u128))
            .collect();
        let key = |len: usize| -> u128 {
            if exact_keys {
                codes[..len].iter().fold(0u128, |acc, &c| acc * alphabet + c)
            } else {
                let mut h1 = DefaultHasher::new();
                codes[..len].hash(&mut h1);
                let mut h2 = DefaultHasher::new();
                (len, &codes[..len], 0x9e37_79b9u32).hash(&mut h2);
                (u128::from(h1.finish()) << 64) | u128::from(h2.finish())
            }
        };
        let hit_tail = codes.contains(&tail_code);
        Ok((key(n), (n > 1).then(|| key(n - 1)), hit_tail))
    })?;
    let mut cur = vec![BTreeMap::new(); JACKKNIFE_BLOCKS];
    let mut prev = vec![BTreeMap::new(); JACKKNIFE_BLOCKS];
    let mut tail_hits = 0u64;
    for (k, (kn, kp, t)) in words.into_iter().enumerate() {
        let b = ((plan.offset + k as u64) % JACKKNIFE_BLOCKS as u64) as usize;
        *cur[b].entry(kn).or_insert(0u64) += 1;
        if let Some(kp) = kp {
            *prev[b].entry(kp).or_insert(0u64) += 1;
        }
        tail_hits += u64::from(t);
    }
    if plan.samples == 0 {
        return Err(EstimatorError::EmptyDistribution);
    }
    let (hn, sen, distinct, has_bar) = block_entropy(&cur, false);
    let (masses, tail_entropy) = partition_profile(mu, p);
    let m = tail_hits as f64 / plan.samples as f64;
    let tail_n = unresolved_bound(&masses, tail_entropy, m, n);
    let (value, se, tail_bound) = match estimator {
        Estimator::Difference if n > 1 => {
            let (hp, sep, _, _) = block_entropy(&prev, false);
            let tail_p = unresolved_bound(&masses, tail_entropy, m, n - 1);
            (hn - hp, (sen * sen + sep * sep).sqrt(), tail_n + tail_p)
        }
        Estimator::Difference => (hn, sen, tail_n),
        _ => (hn / n as f64, sen / n as f64, tail_n / n as f64),
    };
    let mut flags = Vec::new();
    if distinct > plan.samples / UNDERSAMPLED_RATIO {
        flags.push(Flag::Undersampled);
    }
    if !has_bar {
        flags.push(Flag::NoErrorBar);
    }
    if !exact_keys {
        flags.push(Flag::HashedWords);
    }
    Ok(EntropyEstimate {
        value,
        n,
        samples: plan.samples,
        std_error: se,
        estimator,
        tail_bound,
        distinct,
        flags,
    })
}

/// Reference value of the Kolmogorov-Sinai entropy of a builtin map via
/// `∫ log|T'| dμ`, integrated in quantile coordinates `u = F(x)` piece by
/// piece so every singularity sits at an endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub error_estimate: f64,
}

/// Quantile range and `|T'|` on that range.
type OraclePiece = (f64, f64, Box<dyn Fn(f64) -> f64 + Sync>);

pub fn rokhlin_formula_oracle(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    tol: f64,
) -> Result<OracleValue, EstimatorError> {
    let unsupported = || EstimatorError::UnsupportedMap(map.name().to_string());
    let builtin = map.builtin_kind().ok_or_else(unsupported)?;
    if *mu != builtin.invariant_measure() {
        return Err(unsupported());
    }
    let pieces: Vec<OraclePiece> = match builtin {
        Builtin::Gauss { .. } => vec![(0.0, 1.0, Box::new(|x: f64| 1.0 / (x * x)))],
        _ => map
            .branches()
            .iter()
            .map(|b| {
                let d = b.domain();
                let b = b.clone();
                let f: Box<dyn Fn(f64) -> f64 + Sync> =
                    Box::new(move |x: f64| b.derivative_abs(x).expect("builtin branches have derivatives"));
                (mu.cdf(d.lo()), mu.cdf(d.hi()), f)
            })
            .collect(),
    };
    let mut value = 0.0;
    let mut err = 0.0;
    let share = tol / pieces.len() as f64;
    for (a, b, deriv) in &pieces {
        let g = |u: f64| {
            let x = mu.quantile(u);
            let d = deriv(x);
            // log singularities at the endpoints are integrable and the
            // double-exponential nodes never land on them exactly
            if d > 0.0 && d.is_finite() {
                d.ln()
            } else {
                0.0
            }
        };
        let o = quadrature::integrate(g, *a, *b, share);
        value += o.integral;
        err += o.error_estimate;
    }
    Ok(OracleValue {
        value,
        error_estimate: err,
    })
}

/// `π² / (6 ln 2)`, the Kolmogorov-Sinai entropy of the Gauss map.
pub fn gauss_ks_entropy() -> f64 {
    std::f64::consts::PI.powi(2) / (6.0 * LN_2)
}

/// Outcome of checking `h ≤ h^PE ≤ h + ln 2` on estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub hpe: f64,
    pub hks_ref: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
    /// `hpe − lower`; negative means the lower bound is violated.
    pub margin_lower: f64,
    /// `upper − hpe`; negative means the upper bound is violated.
    pub margin_upper: f64,
    pub pass: bool,
}

/// Checks `hks_ref − slack ≤ hpe ≤ hks_ref + ln 2 + slack`, with
/// `slack = 3·std_error + tail bounds` of the permutation-entropy estimate
/// and of the optional partition-rate estimate.
pub fn check_bounds(hpe: &EntropyEstimate, hks: Option<&EntropyEstimate>, hks_ref: f64) -> BoundsReport {
    let slack = 3.0 * hpe.std_error + hpe.tail_bound + hks.map_or(0.0, |h| h.tail_bound);
    let lower = hks_ref - slack;
    let upper = hks_ref + LN_2 + slack;
    BoundsReport {
        hpe: hpe.value,
        hks_ref,
        lower,
        upper,
        slack,
        margin_lower: hpe.value - lower,
        margin_upper: upper - hpe.value,
        pass: lower <= hpe.value && hpe.value <= upper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Builtin;
    use crate::ordinal::OrdinalPattern;

    fn lebesgue() -> InvariantMeasure {
        InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 }
    }

    fn map(b: Builtin) -> PiecewiseMonotoneMap {
        PiecewiseMonotoneMap::builtin(b).unwrap()
    }

    fn synthetic(n: usize, counts: &[(u64, u64)]) -> PatternDistribution {
        let mut d = PatternDistribution::empty(n);
        let mut i = 0;
        for &(rank, c) in counts {
            for _ in 0..c {
                d.record(i, Some(rank));
                i += 1;
            }
        }
        d
    }

    #[test]
    fn degenerate_and_uniform() {
        let single = synthetic(3, &[(0, 1000)]);
        assert_eq!(
            permutation_entropy_estimate(&single, Estimator::Plugin).unwrap().value,
            0.0
        );
        let uniform = synthetic(3, &(0..6).map(|r| (r, 1600)).collect::<Vec<_>>());
        let e = permutation_entropy_estimate(&uniform, Estimator::Plugin).unwrap();
        assert!((e.value - 6f64.ln() / 3.0).abs() < 1e-12);
        assert!((e.value - 0.597253).abs() < 1e-6);
        assert!(matches!(
            permutation_entropy_estimate(&PatternDistribution::empty(3), Estimator::Plugin),
            Err(EstimatorError::EmptyDistribution)
        ));
    }

    #[test]
    fn doubling_order_two_is_balanced() {
        let plan = SamplingPlan {
            seed: 11,
            samples: 200_000,
            offset: 0,
        };
        let d = empirical_pattern_distribution(&map(Builtin::Doubling), &lebesgue(), 2, plan).unwrap();
        let up = d.counts()[&OrdinalPattern::identity(2).rank()] as f64 / d.total as f64;
        assert!((up - 0.5).abs() < 0.005);
        let e = permutation_entropy_estimate(&d, Estimator::Plugin).unwrap();
        assert!((e.value - LN_2 / 2.0).abs() < 0.01);
        let none = SamplingPlan {
            seed: 11,
            samples: 0,
            offset: 0,
        };
        assert_eq!(
            empirical_pattern_distribution(&map(Builtin::Doubling), &lebesgue(), 2, none)
                .unwrap()
                .total,
            0
        );
    }

    #[test]
    fn merge_matches_single_pass() {
        let m = map(Builtin::Tent);
        let whole = empirical_pattern_distribution(
            &m,
            &lebesgue(),
            4,
            SamplingPlan {
                seed: 3,
                samples: 10_000,
                offset: 0,
            },
        )
        .unwrap();
        let mut a = empirical_pattern_distribution(
            &m,
            &lebesgue(),
            4,
            SamplingPlan {
                seed: 3,
                samples: 3_333,
                offset: 0,
            },
        )
        .unwrap();
        let b = empirical_pattern_distribution(
            &m,
            &lebesgue(),
            4,
            SamplingPlan {
                seed: 3,
                samples: 6_667,
                offset: 3_333,
            },
        )
        .unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a, whole);
    }

    #[test]
    fn exact_rates_dyadic() {
        for b in [Builtin::Doubling, Builtin::Tent] {
            let m = map(b);
            let hs = exact_partition_entropies(&m, &lebesgue(), m.monotony_partition(), 12, ExactOptions::default())
                .unwrap();
            for (k, h) in hs.iter().enumerate() {
                assert!((h.value / (k + 1) as f64 - LN_2).abs() < 1e-12);
                assert_eq!(h.tail_bound, 0.0);
            }
            let diff = rate_from_exact(&hs, 12, Estimator::Difference);
            assert!((diff.value - LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_partition_has_zero_rate() {
        let m = map(Builtin::Doubling);
        let p = IntervalPartition::trivial(m.domain());
        let e =
            partition_entropy_rate_exact(&m, &lebesgue(), &p, 6, Estimator::Quotient, ExactOptions::default()).unwrap();
        assert!(e.value.abs() < 1e-15);
    }

    #[test]
    fn cell_budget() {
        let m = map(Builtin::Doubling);
        let opts = ExactOptions {
            budget: 100,
            prune_below: 0.0,
        };
        let r = exact_partition_entropies(&m, &lebesgue(), m.monotony_partition(), 10, opts);
        assert!(matches!(r, Err(EstimatorError::CellExplosion { depth: 7, .. })));
    }

    #[test]
    fn gauss_exact_carries_tail_bound() {
        let m = PiecewiseMonotoneMap::by_name("gauss", Some(40)).unwrap();
        let hs = exact_partition_entropies(
            &m,
            &InvariantMeasure::Gauss,
            m.monotony_partition(),
            2,
            ExactOptions::default(),
        )
        .unwrap();
        assert!(hs[0].tail_bound > 0.0 && hs[1].tail_bound > hs[0].tail_bound);
        // H(M) lies inside the certified range
        let hm = crate::measures::gauss_monotony_entropy(100_000);
        assert!(hs[0].value <= hm.upper() && hm.lower() <= hs[0].value + hs[0].tail_bound);
    }

    #[test]
    fn null_cells_are_skipped_when_refining() {
        // the {0} cell has zero measure and must not receive an id
        let m = PiecewiseMonotoneMap::by_name("gauss", Some(5)).unwrap();
        let hs = exact_partition_entropies(
            &m,
            &InvariantMeasure::Gauss,
            m.monotony_partition(),
            3,
            ExactOptions::default(),
        )
        .unwrap();
        assert_eq!(hs.len(), 3);
        assert!(hs
            .windows(2)
            .all(|w| w[1].value >= w[0].value && w[0].value.is_finite()));
    }

    #[test]
    fn sampled_rate_close_to_exact() {
        let m = map(Builtin::Doubling);
        let plan = SamplingPlan {
            seed: 1,
            samples: 100_000,
            offset: 0,
        };
        let e = partition_entropy_rate_sampled(&m, &lebesgue(), m.monotony_partition(), 6, Estimator::Quotient, plan)
            .unwrap();
        assert!((e.value - LN_2).abs() < 0.01 + 3.0 * e.std_error);
    }

    #[test]
    fn oracle_values() {
        let tol = 1e-10;
        for b in [Builtin::Doubling, Builtin::Tent] {
            let o = rokhlin_formula_oracle(&map(b), &lebesgue(), tol).unwrap();
            assert!((o.value - LN_2).abs() < 1e-9);
        }
        let g = PiecewiseMonotoneMap::by_name("gauss", Some(10)).unwrap();
        let o = rokhlin_formula_oracle(&g, &InvariantMeasure::Gauss, tol).unwrap();
        assert!((o.value - gauss_ks_entropy()).abs() < 1e-6, "{}", o.value);
        let l = map(Builtin::Logistic);
        let o = rokhlin_formula_oracle(&l, &InvariantMeasure::Arcsine, tol).unwrap();
        assert!((o.value - LN_2).abs() < 1e-6, "{}", o.value);
    }

    #[test]
    fn bounds_examples() {
        let est = |v: f64| EntropyEstimate {
            value: v,
            n: 10,
            samples: 1,
            std_error: 0.001,
            estimator: Estimator::Plugin,
            tail_bound: 0.0,
            distinct: 1,
            flags: vec![],
        };
        assert!(!check_bounds(&est(LN_2 + 1.0), None, LN_2).pass);
        let r = check_bounds(&est(LN_2), None, LN_2);
        assert!(r.pass && (r.margin_lower - 0.003).abs() < 1e-15);
    }
}
