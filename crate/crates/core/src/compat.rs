//! Exact compatible-pattern sets.
//!
//! On a cylinder `M(w)` every iterate `T^s` is a composition of fixed
//! monotone branches, so each difference `T^s − T^t` is continuous there.
//! Locating all sign changes splits the cylinder into subintervals of
//! constant ordinal pattern, and the set of patterns is read off their
//! midpoints. The pattern-count bound `|S_n| ≤ 2^{#matches}`, its per-lag
//! factorization and the propagation rule are then checked as exact integer
//! statements.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::maps::{Direction, MapError, MonotoneBranch, PiecewiseMonotoneMap};
use crate::measures::InvariantMeasure;
use crate::ordinal::{pattern_of, OrdinalPattern, TiePolicy, MAX_ORDER};
use crate::rng::{streams, CounterRng};

/// Grid intervals of the first sign-change scan.
pub const SCAN_INTERVALS: usize = 1024;
/// Grid intervals of the consistency rescan; must find no new sign changes.
pub const RESCAN_INTERVALS: usize = 2 * SCAN_INTERVALS;
/// Subintervals shorter than this are also probed near both ends.
pub const GRAZING_LENGTH: f64 = 1e-10;
/// Roots closer than this fraction of the cylinder length are one breakpoint.
pub const ROOT_CLUSTER_REL: f64 = 1e-9;
/// Longest words accepted by [`verify_lemma`].
pub const MAX_VERIFY_LENGTH: usize = 8;
pub const DEFAULT_WORD_BUDGET: usize = 10_000_000;
/// Witness words kept verbatim in a summary; the rest are only counted.
pub const MAX_LISTED_WITNESSES: usize = 100;

#[derive(Debug, Error)]
pub enum CompatError {
    #[error("word length {0} unsupported (need 2 ≤ n ≤ {MAX_ORDER})")]
    BadLength(usize),
    #[error("verification depth {0} exceeds {MAX_VERIFY_LENGTH}")]
    DepthTooLarge(usize),
    #[error("cylinder of word {0:?} is empty")]
    EmptyCylinder(Vec<u32>),
    #[error("more than {budget} {what}")]
    BudgetExceeded { budget: usize, what: &'static str },
    #[error("invariant violated on word {:?}: {}", .0.word, .0.failure)]
    Violation(Box<ReproBundle>),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Everything needed to rerun a failing word by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproBundle {
    pub word: Vec<u32>,
    pub cylinder_lo: f64,
    pub cylinder_hi: f64,
    pub roots: Vec<f64>,
    pub patterns: Vec<OrdinalPattern>,
    pub failure: String,
}

/// A maximal subinterval of a cylinder on which the pattern is constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternCell {
    pub lo: f64,
    pub hi: f64,
    pub pattern: OrdinalPattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompatFlag {
    /// The doubled-density rescan found sign changes the first scan missed.
    RescanFoundNewRoots,
    /// A subinterval midpoint produced tied iterates and was skipped.
    TiedMidpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub word: Vec<u32>,
    pub cylinder_lo: f64,
    pub cylinder_hi: f64,
    pub cylinder_measure: f64,
    /// Distinct patterns in rank order.
    pub patterns: Vec<OrdinalPattern>,
    pub count: u64,
    pub bound: u64,
    /// `|F_n^d|` for `d = 1..n-1`.
    pub per_d_counts: Vec<u64>,
    pub cells: Vec<PatternCell>,
    pub roots: Vec<f64>,
    pub flags: Vec<CompatFlag>,
}

impl CompatReport {
    pub fn per_d_product(&self) -> u64 {
        self.per_d_counts.iter().product()
    }
}

/// `2^{#{s ≤ n-2 : w_s = w_{n-1}}}`.
pub fn lemma_bound(word: &[u32]) -> u64 {
    let Some((last, rest)) = word.split_last() else {
        return 1;
    };
    1u64 << rest.iter().filter(|&&l| l == *last).count()
}

/// The branches a word pins its iterates to.
struct WordOrbit<'a> {
    branches: Vec<&'a MonotoneBranch>,
}

impl<'a> WordOrbit<'a> {
    fn new(map: &'a PiecewiseMonotoneMap, word: &[u32]) -> Result<Self, MapError> {
        Ok(WordOrbit {
            branches: word.iter().map(|&l| map.branch(l)).collect::<Result<_, _>>()?,
        })
    }

    /// `out[k] = T^k x`, composing the word's branches.
    fn window(&self, x: f64, out: &mut [f64]) {
        let mut y = x;
        let last = out.len() - 1;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = y;
            if k < last {
                y = self.branches[k].eval(y);
            }
        }
    }

    fn difference(&self, x: f64, s: usize, t: usize, buf: &mut [f64]) -> f64 {
        self.window(x, &mut buf[..=t]);
        buf[s] - buf[t]
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Brackets `(a, b)` of grid indices between which the sign flips, scanning
/// every `step`-th grid point.
fn sign_changes(diffs: &[f64], step: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut last: Option<(usize, i8)> = None;
    for k in (0..diffs.len()).step_by(step) {
        let s = sign(diffs[k]);
        if s == 0 {
            continue;
        }
        if let Some((j, prev)) = last {
            if prev != s {
                out.push((j, k));
            }
        }
        last = Some((k, s));
    }
    out
}

/// Bisects until the bracket cannot be split further in floating point.
fn bisect(orbit: &WordOrbit, s: usize, t: usize, mut lo: f64, mut hi: f64, buf: &mut [f64]) -> f64 {
    let s_lo = sign(orbit.difference(lo, s, t, buf));
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sm = sign(orbit.difference(mid, s, t, buf));
        if sm == 0 {
            return mid;
        }
        if sm == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact `S_n(w)`: the patterns realized on positive-length parts of `M(w)`.
///
/// Fails with [`CompatError::Violation`] if any of the checked invariants
/// breaks: the count bound, the factorization, the per-lag case split,
/// constancy of comparisons between distinct labels, or the propagation rule.
pub fn compatible_patterns_exact(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    word: &[u32],
    budget: usize,
) -> Result<CompatReport, CompatError> {
    let n = word.len();
    if !(2..=MAX_ORDER).contains(&n) {
        return Err(CompatError::BadLength(n));
    }
    let cyl = map.cylinder_interval(word)?;
    if cyl.length() <= 0.0 {
        return Err(CompatError::EmptyCylinder(word.to_vec()));
    }
    let orbit = WordOrbit::new(map, word)?;
    let (a, b) = (cyl.lo(), cyl.hi());
    let grid: Vec<f64> = (0..=RESCAN_INTERVALS)
        .map(|k| {
            if k == RESCAN_INTERVALS {
                b
            } else {
                a + (b - a) * k as f64 / RESCAN_INTERVALS as f64
            }
        })
        .collect();
    let mut windows = vec![0.0; grid.len() * n];
    for (k, &x) in grid.iter().enumerate() {
        orbit.window(x, &mut windows[k * n..(k + 1) * n]);
    }

    let mut flags = Vec::new();
    let mut roots = Vec::new();
    let mut buf = vec![0.0; n];
    let mut diffs = vec![0.0; grid.len()];
    for s in 0..n {
        for t in s + 1..n {
            for (k, d) in diffs.iter_mut().enumerate() {
                *d = windows[k * n + s] - windows[k * n + t];
            }
            let coarse = sign_changes(&diffs, RESCAN_INTERVALS / SCAN_INTERVALS);
            let fine = sign_changes(&diffs, 1);
            if fine.len() > coarse.len() && !flags.contains(&CompatFlag::RescanFoundNewRoots) {
                flags.push(CompatFlag::RescanFoundNewRoots);
            }
            for (i, j) in fine {
                // grid points between the bracket ends are exact zeros
                let r = if j > i + 1 {
                    grid[i + 1]
                } else {
                    bisect(&orbit, s, t, grid[i], grid[j], &mut buf)
                };
                roots.push(r);
                if roots.len() > budget {
                    return Err(CompatError::BudgetExceeded { budget, what: "roots" });
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    let merge = ROOT_CLUSTER_REL * (b - a);
    let mut breaks = vec![a];
    for r in roots.iter().copied() {
        let last = *breaks.last().expect("nonempty");
        if r - last > merge.max(8.0 * f64::EPSILON * r.abs()) {
            breaks.push(r);
        }
    }
    if b - *breaks.last().expect("nonempty") > merge {
        breaks.push(b);
    } else {
        *breaks.last_mut().expect("nonempty") = b;
        if breaks.len() == 1 {
            breaks.push(b);
        }
    }

    let mut cells: Vec<PatternCell> = Vec::new();
    let mut win = vec![0.0; n];
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let len = hi - lo;
        let probes: &[f64] = if len < GRAZING_LENGTH {
            &[0.25, 0.5, 0.75]
        } else {
            &[0.5]
        };
        for &f in probes {
            orbit.window(lo + f * len, &mut win);
            match pattern_of(&win, TiePolicy::Strict) {
                Ok(pattern) => match cells.last_mut() {
                    Some(c) if c.pattern == pattern && c.hi == lo => c.hi = hi,
                    _ => cells.push(PatternCell { lo, hi, pattern }),
                },
                Err(_) => {
                    if !flags.contains(&CompatFlag::TiedMidpoint) {
                        flags.push(CompatFlag::TiedMidpoint);
                    }
                }
            }
        }
    }
    let set: BTreeSet<&OrdinalPattern> = cells.iter().map(|c| &c.pattern).collect();
    let mut patterns: Vec<OrdinalPattern> = set.into_iter().cloned().collect();
    patterns.sort_by_key(OrdinalPattern::rank);

    let per_d_counts: Vec<u64> = (1..n)
        .map(|d| {
            let restricted: BTreeSet<Vec<bool>> = patterns
                .iter()
                .map(|p| {
                    let c = p.comparisons();
                    (0..n - d).map(|s| c.get(s, s + d)).collect()
                })
                .collect();
            restricted.len() as u64
        })
        .collect();

    let report = CompatReport {
        word: word.to_vec(),
        cylinder_lo: a,
        cylinder_hi: b,
        cylinder_measure: mu.measure_interval(&cyl),
        count: patterns.len() as u64,
        bound: lemma_bound(word),
        patterns,
        per_d_counts,
        cells,
        roots,
        flags,
    };
    if let Some(failure) = check_invariants(&report, &orbit) {
        return Err(CompatError::Violation(Box::new(ReproBundle {
            word: report.word,
            cylinder_lo: a,
            cylinder_hi: b,
            roots: report.roots,
            patterns: report.patterns,
            failure,
        })));
    }
    Ok(report)
}

fn check_invariants(r: &CompatReport, orbit: &WordOrbit) -> Option<String> {
    let w = &r.word;
    let n = w.len();
    if r.count == 0 {
        return Some("no pattern found on a nonempty cylinder".into());
    }
    if r.count > r.bound {
        return Some(format!("count {} exceeds bound {}", r.count, r.bound));
    }
    if r.count > r.per_d_product() {
        return Some(format!(
            "count {} exceeds per-lag product {}",
            r.count,
            r.per_d_product()
        ));
    }
    for (k, &c) in r.per_d_counts.iter().enumerate() {
        let d = k + 1;
        let cap = if w[n - 1 - d] == w[n - 1] { 2 } else { 1 };
        if c > cap {
            return Some(format!("lag {d} has {c} restrictions, more than {cap}"));
        }
    }
    let comps: Vec<_> = r.patterns.iter().map(OrdinalPattern::comparisons).collect();
    for s in 0..n {
        for t in s + 1..n {
            if w[s] != w[t] && comps.iter().any(|c| c.get(s, t) != comps[0].get(s, t)) {
                return Some(format!("comparison ({s},{t}) varies although labels differ"));
            }
            if w[s] == w[t] && t + 1 < n {
                let flip = orbit.branches[s].direction() == Direction::Decreasing;
                for c in &comps {
                    if c.get(s, t) != (c.get(s + 1, t + 1) ^ flip) {
                        return Some(format!("propagation from ({},{}) to ({s},{t}) fails", s + 1, t + 1));
                    }
                }
            }
        }
    }
    None
}

/// Patterns of `points` uniform samples in the cylinder, for cross-checking.
pub fn compatible_patterns_sampled(
    map: &PiecewiseMonotoneMap,
    word: &[u32],
    points: u64,
    seed: u64,
) -> Result<BTreeSet<OrdinalPattern>, CompatError> {
    let n = word.len();
    if !(2..=MAX_ORDER).contains(&n) {
        return Err(CompatError::BadLength(n));
    }
    let cyl = map.cylinder_interval(word)?;
    if cyl.length() <= 0.0 {
        return Err(CompatError::EmptyCylinder(word.to_vec()));
    }
    let orbit = WordOrbit::new(map, word)?;
    let mut rng = CounterRng::at(seed, streams::COMPAT_SAMPLING, 0, 1);
    let mut win = vec![0.0; n];
    let mut out = BTreeSet::new();
    for _ in 0..points {
        let x = cyl.lo() + cyl.length() * rng.uniform();
        orbit.window(x, &mut win);
        if let Ok(p) = pattern_of(&win, TiePolicy::Discard) {
            out.insert(p);
        }
    }
    Ok(out)
}

/// Per-length totals of an exhaustive run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub n: usize,
    pub words: u64,
    /// `Σ_w μ(M(w)) ln|S_n(w)| / n`.
    pub error_term: f64,
    pub resolved_mass: f64,
    /// Mass of words through the unresolved tail, never enumerated.
    pub tail_mass: f64,
    pub equality_witnesses: u64,
    pub rescan_flags: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub map: String,
    pub n_max: usize,
    pub words_checked: u64,
    pub max_count_over_bound_ratio: f64,
    /// Error term at `n_max`, to be compared with `ln 2`.
    pub error_term: f64,
    /// Words with `|S_n| = 2^{#matches} ≥ 2`, first few only.
    pub witnesses_of_equality: Vec<Vec<u32>>,
    pub per_length: Vec<LengthSummary>,
    pub factorization_checked: bool,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    words: Vec<u64>,
    error: Vec<f64>,
    mass: Vec<f64>,
    witnesses: Vec<u64>,
    rescans: Vec<u64>,
    listed: Vec<Vec<u32>>,
    max_ratio: f64,
}

impl Tally {
    fn new(n_max: usize) -> Self {
        Tally {
            words: vec![0; n_max + 1],
            error: vec![0.0; n_max + 1],
            mass: vec![0.0; n_max + 1],
            witnesses: vec![0; n_max + 1],
            rescans: vec![0; n_max + 1],
            listed: Vec::new(),
            max_ratio: 0.0,
        }
    }

    fn add(&mut self, r: &CompatReport) {
        let n = r.word.len();
        self.words[n] += 1;
        self.error[n] += r.cylinder_measure * (r.count as f64).ln();
        self.mass[n] += r.cylinder_measure;
        if r.count == r.bound && r.bound >= 2 {
            self.witnesses[n] += 1;
            if self.listed.len() < MAX_LISTED_WITNESSES {
                self.listed.push(r.word.clone());
            }
        }
        if r.flags.contains(&CompatFlag::RescanFoundNewRoots) {
            self.rescans[n] += 1;
        }
        self.max_ratio = self.max_ratio.max(r.count as f64 / r.bound as f64);
    }

    fn absorb(&mut self, o: Tally) {
        for n in 0..self.words.len() {
            self.words[n] += o.words[n];
            self.error[n] += o.error[n];
            self.mass[n] += o.mass[n];
            self.witnesses[n] += o.witnesses[n];
            self.rescans[n] += o.rescans[n];
        }
        for w in o.listed {
            if self.listed.len() < MAX_LISTED_WITNESSES {
                self.listed.push(w);
            }
        }
        self.max_ratio = self.max_ratio.max(o.max_ratio);
    }
}

/// Checks every positive-measure word of length `2..=n_max`.
///
/// Words are grown depth first from each first letter, pruning empty
/// cylinders; first letters run in parallel and their tallies are combined
/// in letter order, so the summary does not depend on the thread count.
pub fn verify_lemma(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    n_max: usize,
    budget: usize,
) -> Result<LemmaSummary, CompatError> {
    if n_max > MAX_VERIFY_LENGTH {
        return Err(CompatError::DepthTooLarge(n_max));
    }
    if n_max < 2 {
        return Err(CompatError::BadLength(n_max));
    }
    let labels: Vec<u32> = map
        .positive_labels()
        .into_iter()
        .filter(|&l| map.cylinder_interval(&[l]).is_ok_and(|c| c.length() > 0.0))
        .collect();
    let checked = std::sync::atomic::AtomicUsize::new(0);
    let tallies: Vec<Result<Tally, CompatError>> = labels
        .par_iter()
        .map(|&first| {
            let mut tally = Tally::new(n_max);
            let mut word = vec![first];
            grow(map, mu, &labels, &mut word, n_max, budget, &checked, &mut tally)?;
            Ok(tally)
        })
        .collect();
    let mut total = Tally::new(n_max);
    for t in tallies {
        total.absorb(t?);
    }
    let omega = mu.measure_interval(&map.domain());
    let per_length: Vec<LengthSummary> = (2..=n_max)
        .map(|n| LengthSummary {
            n,
            words: total.words[n],
            error_term: total.error[n] / n as f64,
            resolved_mass: total.mass[n],
            tail_mass: (omega - total.mass[n]).max(0.0),
            equality_witnesses: total.witnesses[n],
            rescan_flags: total.rescans[n],
        })
        .collect();
    Ok(LemmaSummary {
        map: map.name().to_string(),
        n_max,
        words_checked: total.words.iter().sum(),
        max_count_over_bound_ratio: total.max_ratio,
        error_term: per_length.last().map_or(0.0, |l| l.error_term),
        witnesses_of_equality: total.listed,
        per_length,
        factorization_checked: true,
    })
}

#[allow(clippy::too_many_arguments)]
fn grow(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    labels: &[u32],
    word: &mut Vec<u32>,
    n_max: usize,
    budget: usize,
    checked: &std::sync::atomic::AtomicUsize,
    tally: &mut Tally,
) -> Result<(), CompatError> {
    if word.len() == n_max {
        return Ok(());
    }
    for &l in labels {
        word.push(l);
        let positive = map.cylinder_interval(word)?.length() > 0.0;
        if positive {
            if checked.fetch_add(1, std::sync::atomic::Ordering::Relaxed) >= budget {
                return Err(CompatError::BudgetExceeded { budget, what: "words" });
            }
            let report = compatible_patterns_exact(map, mu, word, budget)?;
            tally.add(&report);
            grow(map, mu, labels, word, n_max, budget, checked, tally)?;
        }
        word.pop();
    }
    Ok(())
}

/// Interval spanned by a report's cylinder.
pub fn report_cylinder(r: &CompatReport) -> Interval {
    Interval::closed(r.cylinder_lo, r.cylinder_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Builtin;

    fn map(b: Builtin) -> PiecewiseMonotoneMap {
        PiecewiseMonotoneMap::builtin(b).unwrap()
    }

    fn leb() -> InvariantMeasure {
        InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 }
    }

    fn pats(r: &CompatReport) -> Vec<String> {
        r.patterns.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(lemma_bound(&[0, 1, 0, 0]), 4);
        assert_eq!(lemma_bound(&[0, 1]), 1);
        assert_eq!(lemma_bound(&[7, 7, 7]), 4);
    }

    #[test]
    fn spec_words() {
        let d = map(Builtin::Doubling);
        let r = compatible_patterns_exact(&d, &leb(), &[0, 0, 0], DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(pats(&r), ["(0,1,2)"]);
        assert_eq!((r.count, r.bound, r.per_d_counts.clone()), (1, 4, vec![1, 1]));
        let r = compatible_patterns_exact(&d, &leb(), &[1, 0], DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(pats(&r), ["(1,0)"]);
        assert_eq!((r.count, r.bound), (1, 1));
        let t = map(Builtin::Tent);
        let r = compatible_patterns_exact(&t, &leb(), &[1, 1], DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(pats(&r), ["(0,1)", "(1,0)"]);
        assert_eq!((r.count, r.bound, r.per_d_counts.clone()), (2, 2, vec![2]));
        assert_eq!(r.roots.len(), 1);
        assert!((r.roots[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_labels_force_one_pattern() {
        let t = map(Builtin::Tent);
        for w in [[0u32, 1], [1, 0]] {
            let r = compatible_patterns_exact(&t, &leb(), &w, DEFAULT_WORD_BUDGET).unwrap();
            assert_eq!(r.count, 1);
            assert!(r.per_d_counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn empty_and_short_words() {
        let d = map(Builtin::Doubling);
        assert!(matches!(
            compatible_patterns_exact(&d, &leb(), &[0], 10),
            Err(CompatError::BadLength(1))
        ));
        let l = map(Builtin::Logistic);
        let mu = InvariantMeasure::Arcsine;
        // the logistic image of the left half is all of [0,1], so nothing is empty there
        assert!(compatible_patterns_exact(&l, &mu, &[0, 1], 10).is_ok());
    }

    #[test]
    fn sampled_never_exceeds_exact() {
        let t = map(Builtin::Tent);
        for w in [vec![1u32, 1, 1], vec![0, 1, 1, 0], vec![1, 1, 0, 1]] {
            let exact: BTreeSet<_> = compatible_patterns_exact(&t, &leb(), &w, DEFAULT_WORD_BUDGET)
                .unwrap()
                .patterns
                .into_iter()
                .collect();
            let sampled = compatible_patterns_sampled(&t, &w, 20_000, 5).unwrap();
            assert!(sampled.is_subset(&exact), "{w:?}");
        }
    }

    #[test]
    fn small_exhaustive_runs() {
        let s = verify_lemma(&map(Builtin::Tent), &leb(), 4, DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(s.words_checked, 4 + 8 + 16);
        assert!(s.max_count_over_bound_ratio <= 1.0);
        assert!(s.witnesses_of_equality.contains(&vec![1, 1]));
        assert!(s.error_term <= std::f64::consts::LN_2);
        assert!(matches!(
            verify_lemma(&map(Builtin::Tent), &leb(), 4, 10),
            Err(CompatError::BudgetExceeded { .. })
        ));
    }
}
