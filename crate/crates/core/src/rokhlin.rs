//! Rokhlin towers with interval bases and the Q-partition built from them.
//!
//! A base `B` of height `d` satisfies `T^{-k}B ∩ T^{-l}B = ∅` for
//! `0 ≤ k < l < d`. For piecewise-linear maps with dyadic structure the
//! search runs over unions of depth-`L` dyadic cells: two cells conflict when
//! one meets a forward image `T^k` of the other with `k < d`, and a base is
//! an independent set of this conflict graph. An iterated local search finds
//! large independent sets; disjointness of the resulting base is then
//! re-checked with exact preimages.
//!
//! Disjointness is measured by length: with half-open cells an intersection
//! can be a single endpoint, which is a null set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{union_to_json, Cell, Interval, IntervalError, IntervalPartition, IntervalUnion, Label};
use crate::maps::{MapError, PiecewiseMonotoneMap};
use crate::measures::{EntropyValue, InvariantMeasure};
use crate::rng::{streams, CounterRng};

/// Largest supported tower height.
pub const MAX_HEIGHT: usize = 6;
/// Cell budget for the Q-partition.
pub const DEFAULT_Q_BUDGET: usize = 1_000_000;
/// Deepest dyadic grid tried by the exact search.
pub const MAX_SEARCH_DEPTH: u32 = 18;
/// Local-search rounds per grid depth.
pub const SEARCH_ROUNDS: usize = 3000;
/// Two-sided 99% Hoeffding confidence.
const CONFIDENCE_LOG: f64 = 4.605_170_185_988_091; // ln(100)

#[derive(Debug, Error)]
pub enum RokhlinError {
    #[error("tower height {0} unsupported (need 1 ≤ d ≤ {MAX_HEIGHT})")]
    BadHeight(usize),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("no base reached μ(B) ≥ {target}; best found {best_measure}")]
    SearchExhausted { best_measure: f64, target: f64 },
    #[error("refinement at level {depth} needs more than {budget} cells")]
    CellExplosion { depth: usize, budget: usize },
    #[error("more than {budget} {what}")]
    BudgetExceeded { budget: usize, what: &'static str },
    #[error("{0}")]
    Unsupported(String),
    #[error("intervals of the base family overlap")]
    OverlappingFamily,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ExactSearch,
    FirstReturn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Exact,
    Statistical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RokhlinTower {
    pub base: IntervalUnion,
    pub height: usize,
    pub base_measure: f64,
    pub epsilon: f64,
    pub strategy: Strategy,
    /// Dyadic depth of the exact search grid.
    pub grid_depth: Option<u32>,
    pub check: CheckKind,
    /// Upper 99% bound on `max_k μ(B ∩ T^{-k}B)` for statistical towers.
    pub overlap_bound: Option<f64>,
}

impl RokhlinTower {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "height": self.height,
            "epsilon": self.epsilon,
            "base_measure": self.base_measure,
            "strategy": self.strategy,
            "grid_depth": self.grid_depth,
            "check": self.check,
            "overlap_bound": self.overlap_bound,
            "intervals": self.base.len(),
            "base": union_to_json(&self.base),
        })
    }
}

fn check_params(d: usize, eps: f64) -> Result<(), RokhlinError> {
    if d == 0 || d > MAX_HEIGHT {
        return Err(RokhlinError::BadHeight(d));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(RokhlinError::BadEpsilon(eps));
    }
    Ok(())
}

/// Largest `μ(T^{-k}B ∩ T^{-l}B)` over `0 ≤ k < l < d`, from exact preimages.
pub fn tower_overlap(map: &PiecewiseMonotoneMap, base: &IntervalUnion, d: usize) -> f64 {
    let levels: Vec<IntervalUnion> = (0..d).map(|k| map.preimage_iter(base, k)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for l in k + 1..d {
            let overlap = levels[k].intersect(&levels[l]).length();
            if overlap > worst {
                worst = overlap;
            }
        }
    }
    worst
}

/// True when the floors `T^{-k}B`, `k < d`, are pairwise disjoint up to null sets.
pub fn is_tower_base(map: &PiecewiseMonotoneMap, base: &IntervalUnion, d: usize) -> bool {
    tower_overlap(map, base, d) == 0.0
}

/// Finds a base of height `d` with `μ(B) ≥ (1 − ε)/d`.
pub fn build_base(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    d: usize,
    eps: f64,
    strategy: Strategy,
    seed: u64,
) -> Result<RokhlinTower, RokhlinError> {
    check_params(d, eps)?;
    if d == 1 {
        let base = IntervalUnion::from(map.domain());
        return Ok(RokhlinTower {
            base_measure: mu.measure_of(&base),
            base,
            height: 1,
            epsilon: eps,
            strategy,
            grid_depth: None,
            check: CheckKind::Exact,
            overlap_bound: None,
        });
    }
    match strategy {
        Strategy::ExactSearch => exact_search(map, mu, d, eps, seed),
        Strategy::FirstReturn => first_return(map, mu, d, eps, seed),
    }
}

/// Conflict graph on depth-`L` dyadic cells in compressed adjacency form.
struct ConflictGraph {
    offsets: Vec<usize>,
    edges: Vec<u32>,
    blocked: Vec<bool>,
}

impl ConflictGraph {
    fn build(map: &PiecewiseMonotoneMap, depth: u32, d: usize) -> Self {
        let n = 1usize << depth;
        let width = 1.0 / n as f64;
        let lo = map.domain().lo();
        let scale = map.domain().length();
        let per_cell: Vec<(bool, Vec<u32>)> = (0..n)
            .into_par_iter()
            .map(|w| {
                let cell = Interval::half_open(lo + scale * w as f64 * width, lo + scale * (w + 1) as f64 * width);
                let mut image = IntervalUnion::from(cell);
                let mut out = Vec::new();
                let mut blocked = false;
                for _ in 1..d {
                    image = map.forward_image(&image);
                    for piece in image.cells() {
                        let first = (((piece.lo() - lo) / scale) * n as f64).floor().max(0.0) as usize;
                        let last = ((((piece.hi() - lo) / scale) * n as f64).ceil() as usize).min(n);
                        for j in first..last {
                            let target =
                                Interval::half_open(lo + scale * j as f64 * width, lo + scale * (j + 1) as f64 * width);
                            if piece.intersect(&target).length() > 0.0 {
                                if j == w {
                                    blocked = true;
                                } else {
                                    out.push(j as u32);
                                }
                            }
                        }
                    }
                }
                (blocked, out)
            })
            .collect();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut blocked = vec![false; n];
        for (w, (b, out)) in per_cell.into_iter().enumerate() {
            blocked[w] = b;
            for j in out {
                adj[w].push(j);
                adj[j as usize].push(w as u32);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for mut a in adj {
            a.sort_unstable();
            a.dedup();
            edges.extend(a);
            offsets.push(edges.len());
        }
        ConflictGraph {
            offsets,
            edges,
            blocked,
        }
    }

    fn len(&self) -> usize {
        self.blocked.len()
    }

    fn neighbours(&self, v: usize) -> &[u32] {
        &self.edges[self.offsets[v]..self.offsets[v + 1]]
    }

    fn adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbours(u).binary_search(&(v as u32)).is_ok()
    }
}

/// Independent set with per-vertex counts of chosen neighbours.
struct Solution<'g> {
    g: &'g ConflictGraph,
    chosen: Vec<bool>,
    tight: Vec<u32>,
    size: usize,
}

impl<'g> Solution<'g> {
    fn new(g: &'g ConflictGraph) -> Self {
        Solution {
            g,
            chosen: vec![false; g.len()],
            tight: vec![0; g.len()],
            size: 0,
        }
    }

    fn add(&mut self, v: usize) {
        self.chosen[v] = true;
        self.size += 1;
        for &u in self.g.neighbours(v) {
            self.tight[u as usize] += 1;
        }
    }

    fn remove(&mut self, v: usize) {
        self.chosen[v] = false;
        self.size -= 1;
        for &u in self.g.neighbours(v) {
            self.tight[u as usize] -= 1;
        }
    }

    fn free(&self, v: usize) -> bool {
        !self.g.blocked[v] && !self.chosen[v] && self.tight[v] == 0
    }

    fn load(&mut self, chosen: &[bool]) {
        self.chosen.iter_mut().for_each(|c| *c = false);
        self.tight.iter_mut().for_each(|t| *t = 0);
        self.size = 0;
        for (v, &c) in chosen.iter().enumerate() {
            if c {
                self.add(v);
            }
        }
    }

    /// Adds free vertices and applies (1,2)-swaps until neither helps.
    fn improve(&mut self) {
        let n = self.g.len();
        loop {
            let mut changed = false;
            for x in 0..n {
                if self.free(x) {
                    self.add(x);
                    changed = true;
                }
            }
            for x in 0..n {
                if !self.chosen[x] {
                    continue;
                }
                let cand: Vec<usize> = self
                    .g
                    .neighbours(x)
                    .iter()
                    .map(|&u| u as usize)
                    .filter(|&u| !self.g.blocked[u] && self.tight[u] == 1)
                    .collect();
                let pair = cand
                    .iter()
                    .enumerate()
                    .find_map(|(i, &p)| cand[i + 1..].iter().find(|&&q| !self.g.adjacent(p, q)).map(|&q| (p, q)));
                if let Some((p, q)) = pair {
                    self.remove(x);
                    self.add(p);
                    self.add(q);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

/// Iterated local search for a large independent set; stops early once
/// `target` vertices are chosen.
fn max_independent_set(g: &ConflictGraph, target: usize, rounds: usize, rng: &mut CounterRng) -> Vec<bool> {
    let n = g.len();
    let mut sol = Solution::new(g);
    let mut order: Vec<usize> = (0..n).filter(|&v| !g.blocked[v]).collect();
    if order.is_empty() {
        return sol.chosen;
    }
    order.sort_by_key(|&v| g.neighbours(v).len());
    for &v in &order {
        if sol.free(v) {
            sol.add(v);
        }
    }
    sol.improve();
    let mut best = sol.chosen.clone();
    let mut best_size = sol.size;
    for _ in 0..rounds {
        if best_size >= target {
            break;
        }
        // force a random unchosen vertex in, evicting its neighbours
        let v = loop {
            let v = (rng.next_u64() % n as u64) as usize;
            if !g.blocked[v] && !sol.chosen[v] {
                break v;
            }
        };
        for &u in g.neighbours(v) {
            if sol.chosen[u as usize] {
                sol.remove(u as usize);
            }
        }
        sol.add(v);
        sol.improve();
        if sol.size > best_size {
            best_size = sol.size;
            best.clone_from(&sol.chosen);
        } else if sol.size + 1 < best_size || rng.uniform() < 0.1 {
            sol.load(&best);
        }
    }
    best
}

fn exact_search(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    d: usize,
    eps: f64,
    seed: u64,
) -> Result<RokhlinTower, RokhlinError> {
    if !map.is_piecewise_linear() {
        return Err(RokhlinError::Unsupported(format!(
            "exact search needs a piecewise-linear map; use first_return for '{}'",
            map.name()
        )));
    }
    let target = (1.0 - eps) / d as f64;
    let mut best_measure: f64 = 0.0;
    for depth in d as u32..=MAX_SEARCH_DEPTH {
        let g = ConflictGraph::build(map, depth, d);
        let n = g.len();
        let need = (target * n as f64 - 1e-9).ceil().max(1.0) as usize;
        let mut rng = CounterRng::at(seed, streams::ROKHLIN_SEARCH, u64::from(depth), 1 << 40);
        let chosen = max_independent_set(&g, need, SEARCH_ROUNDS, &mut rng);
        let lo = map.domain().lo();
        let scale = map.domain().length();
        let base = IntervalUnion::normalize(chosen.iter().enumerate().filter(|(_, &c)| c).map(|(w, _)| {
            Interval::half_open(lo + scale * w as f64 / n as f64, lo + scale * (w + 1) as f64 / n as f64)
        }));
        let measure = mu.measure_of(&base);
        best_measure = best_measure.max(measure);
        if measure >= target && is_tower_base(map, &base, d) {
            return Ok(RokhlinTower {
                base,
                height: d,
                base_measure: measure,
                epsilon: eps,
                strategy: Strategy::ExactSearch,
                grid_depth: Some(depth),
                check: CheckKind::Exact,
                overlap_bound: None,
            });
        }
    }
    Err(RokhlinError::SearchExhausted { best_measure, target })
}

/// What [`approximate_by_intervals`] approximates.
pub enum Target<'a> {
    /// Already an interval union; returned unchanged.
    Union(IntervalUnion),
    /// A membership test.
    Oracle(&'a (dyn Fn(f64) -> bool + Sync)),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Approximation {
    pub union: IntervalUnion,
    /// Stratified estimate of `μ(A △ target)`.
    pub estimate: f64,
    /// One-sided 99% Hoeffding slack added to the estimate.
    pub slack: f64,
    pub bins: usize,
    pub check: CheckKind,
}

impl Approximation {
    pub fn error_bound(&self) -> f64 {
        self.estimate + self.slack
    }
}

/// Samples per bin when approximating an oracle target.
pub const SAMPLES_PER_BIN: usize = 16;

/// A finite interval union `A` with `μ(A △ target) ≤ ε` at 99% confidence.
///
/// Ω is cut into `K` bins of equal μ-mass (quantile space); a bin joins `A`
/// when most of its samples lie in the target. A second, independent sample
/// estimates the mismatch, and `K` doubles until estimate plus Hoeffding
/// slack is at most `ε`.
pub fn approximate_by_intervals(
    target: Target,
    mu: &InvariantMeasure,
    eps: f64,
    seed: u64,
    max_bins: usize,
) -> Result<Approximation, RokhlinError> {
    let oracle = match target {
        Target::Union(u) => {
            return Ok(Approximation {
                union: u,
                estimate: 0.0,
                slack: 0.0,
                bins: 0,
                check: CheckKind::Exact,
            })
        }
        Target::Oracle(f) => f,
    };
    let m = SAMPLES_PER_BIN;
    let mut k = 64usize;
    let mut stream_offset = 0u64;
    while k <= max_bins {
        let counts: Vec<(usize, usize)> = (0..k)
            .into_par_iter()
            .map(|b| {
                let words = 2 * m as u64;
                let mut rng = CounterRng::at(seed, streams::ROKHLIN_SAMPLING, stream_offset + b as u64, words);
                let mut draw = || mu.quantile((b as f64 + rng.uniform()) / k as f64);
                let select = (0..m).filter(|_| oracle(draw())).count();
                let check = (0..m).filter(|_| oracle(draw())).count();
                (select, check)
            })
            .collect();
        stream_offset += k as u64;
        let mut mismatch = 0.0;
        let mut pieces = Vec::new();
        for (b, &(select, check)) in counts.iter().enumerate() {
            let inside = 2 * select > m;
            let wrong = if inside { m - check } else { check };
            mismatch += wrong as f64 / m as f64 / k as f64;
            if inside {
                pieces.push(Interval::half_open(
                    mu.quantile(b as f64 / k as f64),
                    mu.quantile((b + 1) as f64 / k as f64),
                ));
            }
        }
        let slack = (CONFIDENCE_LOG / (2.0 * (m * k) as f64)).sqrt();
        if mismatch + slack <= eps {
            return Ok(Approximation {
                union: IntervalUnion::normalize(pieces),
                estimate: mismatch,
                slack,
                bins: k,
                check: CheckKind::Statistical,
            });
        }
        k *= 2;
    }
    Err(RokhlinError::BudgetExceeded {
        budget: max_bins,
        what: "bins",
    })
}

/// Verification samples of a statistical tower.
pub const FIRST_RETURN_CHECK_SAMPLES: usize = 200_000;
/// Piece cap for the skyscraper levels.
pub const FIRST_RETURN_MAX_PIECES: usize = 1 << 17;
/// Cap on branch-piece preimage evaluations per level.
const FIRST_RETURN_MAX_OPS: usize = 50_000_000;
/// Deepest skyscraper level.
const FIRST_RETURN_MAX_LEVEL: usize = 64;

/// Skyscraper construction over a seed interval `S`, for maps without exact
/// dyadic structure.
///
/// With `e(x)` the first entrance time into `S` and `r` the return time on
/// `S`, the levels `{e = j} = T^{-1}{e = j−1} ∖ S` are interval unions. The
/// union of the levels `j ≡ 0 mod d` with `{x ∈ S : r(x) ≡ 0 mod d}` never
/// meets its own preimages `T^{-k}`, `1 ≤ k < d`, and by Kac's formula has
/// measure close to `1/d − μ(S)`. Levels are truncated and their lightest
/// pieces dropped to stay within budget; a subset of a base is still a base.
/// Preimages go through floating-point branch inverses, so the tower
/// property is confirmed by sampling.
fn first_return(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    d: usize,
    eps: f64,
    seed: u64,
) -> Result<RokhlinTower, RokhlinError> {
    let target = (1.0 - eps) / d as f64;
    let design = (1.0 - eps / 2.0) / d as f64;
    let cap = FIRST_RETURN_MAX_PIECES
        .min(FIRST_RETURN_MAX_OPS / map.branches().len().max(1))
        .max(1);
    let mut best: Option<(f64, IntervalUnion)> = None;
    for k in 0..6 {
        let s = (eps / (4.0 * d as f64) * f64::from(1u32 << k)).min(0.5);
        let seed_set = IntervalUnion::from(Interval::half_open(mu.quantile(0.3), mu.quantile(0.3 + s)));
        let mut level = seed_set.clone();
        let mut parts: Vec<Interval> = Vec::new();
        for j in 1..=FIRST_RETURN_MAX_LEVEL {
            let pre = map.preimage(&keep_heaviest(&level, mu, cap)).resolved;
            let next = pre.difference(&seed_set);
            if j % d == 0 {
                parts.extend(next.cells().iter().copied());
                parts.extend(pre.intersect(&seed_set).into_cells());
            }
            level = next;
            if level.is_empty() {
                break;
            }
        }
        let base = IntervalUnion::normalize(parts);
        let m = mu.measure_of(&base);
        if best.as_ref().is_none_or(|(b, _)| m > *b) {
            best = Some((m, base));
        }
        if m >= design {
            break;
        }
    }
    let (base_measure, base) = best.expect("at least one seed size tried");
    if base_measure < target {
        return Err(RokhlinError::SearchExhausted {
            best_measure: base_measure,
            target,
        });
    }
    let overlap = statistical_overlap(map, mu, &base, d, seed, FIRST_RETURN_CHECK_SAMPLES);
    Ok(RokhlinTower {
        base,
        height: d,
        base_measure,
        epsilon: eps,
        strategy: Strategy::FirstReturn,
        grid_depth: None,
        check: CheckKind::Statistical,
        overlap_bound: Some(overlap),
    })
}

/// The `cap` heaviest pieces of a union; ties keep the leftmost.
fn keep_heaviest(u: &IntervalUnion, mu: &InvariantMeasure, cap: usize) -> IntervalUnion {
    if u.len() <= cap {
        return u.clone();
    }
    let mut idx: Vec<(usize, f64)> = u.cells().iter().map(|c| mu.measure_interval(c)).enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    IntervalUnion::normalize(idx[..cap].iter().map(|&(i, _)| u.cells()[i]))
}

/// 99% upper bound on `max_k μ(B ∩ T^{-k}B)`, `1 ≤ k < d`, by sampling.
pub fn statistical_overlap(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    base: &IntervalUnion,
    d: usize,
    seed: u64,
    samples: usize,
) -> f64 {
    let hits: Vec<Vec<bool>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::at(seed, streams::ROKHLIN_SAMPLING, u64::MAX / 2 + i, 1);
            let mut x = mu.quantile(rng.uniform());
            let start = base.contains(x);
            (1..d)
                .map(|_| {
                    x = map.eval(x).unwrap_or(f64::NAN);
                    start && base.contains(x)
                })
                .collect()
        })
        .collect();
    let slack = (CONFIDENCE_LOG / (2.0 * samples as f64)).sqrt();
    (0..d.saturating_sub(1))
        .map(|k| hits.iter().filter(|h| h[k]).count() as f64 / samples as f64)
        .fold(0.0, f64::max)
        + slack
}

/// The partition of the construction together with its good labels.
#[derive(Clone, Debug, PartialEq)]
pub struct QPartition {
    pub cells: IntervalPartition,
    /// Indices of cells inside the tower floors `⋃_{l<d,i} T^{-l}Â_i`.
    pub good: Vec<usize>,
    pub epsilon: f64,
    pub height: usize,
    /// The trimmed base pieces `Â_i`.
    pub a_hat: Vec<IntervalUnion>,
    /// `μ(⋃_i Â_i)`.
    pub a_hat_measure: f64,
    /// Cells that straddle the floor boundary; zero when the construction is sound.
    pub straddling: usize,
}

impl QPartition {
    pub fn good_union(&self) -> IntervalUnion {
        IntervalUnion::normalize(self.good.iter().map(|&j| self.cells.cells()[j].interval))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "height": self.height,
            "epsilon": self.epsilon,
            "good": self.good,
            "a_hat_measure": self.a_hat_measure,
            "straddling": self.straddling,
            "cells": self.cells.to_json(),
        })
    }
}

/// Two sorted tilings intersected pairwise, keeping positive-length pieces.
fn overlay(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        let piece = a[i].intersect(&b[j]);
        if piece.length() > 0.0 {
            out.push(piece);
        }
        let (ah, bh) = (a[i].hi(), b[j].hi());
        if ah < bh {
            i += 1;
        } else if bh < ah {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    out
}

/// The Q-partition for a disjoint interval family `A` of tower height `d`.
///
/// `Â_i = A_i ∖ ⋃_{1≤k<d} ⋃_j T^{-k}A_j`. The base partition is `M` cut at
/// the endpoints of every `Â_i`, and `P = ⋁_{k=0}^{2d-2} T^{-k}(base)` via
/// `Y_1 = base`, `Y_{j+1} = base ∨ T^{-1}Y_j` with branchwise preimages.
/// Each floor `T^{-l}Â_i` with `l < d` is a union of `P` cells, and the good
/// labels are the cells inside some floor.
pub fn build_q_partition(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    a: &[Interval],
    d: usize,
    eps: f64,
    budget: usize,
) -> Result<QPartition, RokhlinError> {
    if d == 0 || d > MAX_HEIGHT {
        return Err(RokhlinError::BadHeight(d));
    }
    if map.tail().is_some() {
        return Err(RokhlinError::Unsupported(
            "the Q-partition needs finitely many branches".into(),
        ));
    }
    let family = IntervalUnion::normalize(a.iter().copied());
    let total: f64 = a.iter().map(Interval::length).sum();
    if (family.length() - total).abs() > 0.0 {
        return Err(RokhlinError::OverlappingFamily);
    }
    let union_a = family.clone();
    let shadow = IntervalUnion::normalize((1..d).flat_map(|k| map.preimage_iter(&union_a, k).into_cells()));
    let a_hat: Vec<IntervalUnion> = a
        .iter()
        .map(|ai| IntervalUnion::from(*ai).difference(&shadow))
        .collect();
    let hat_union = IntervalUnion::normalize(a_hat.iter().flat_map(|u| u.cells().to_vec()));

    let domain = map.domain();
    let m_cells: Vec<Interval> = map.monotony_partition().cells().iter().map(|c| c.interval).collect();
    let structure: Vec<Interval> = {
        let outside = IntervalUnion::from(domain).difference(&hat_union);
        let mut v: Vec<Interval> = hat_union.cells().iter().chain(outside.cells()).copied().collect();
        v.retain(|c| c.length() > 0.0);
        v.sort_by(|x, y| x.start_order(y));
        v
    };
    let base = overlay(&m_cells, &structure);
    let mut level = base.clone();
    for depth in 2..=(2 * d - 1) {
        let mut pre: Vec<Interval> = Vec::new();
        for b in map.branches() {
            let range = b.range();
            let start = level.partition_point(|c| c.hi() <= range.lo());
            let mut pieces: Vec<Interval> = level[start..]
                .iter()
                .take_while(|c| c.lo() < range.hi() || (c.lo() == range.hi() && range.hi_closed()))
                .map(|c| b.preimage(c))
                .filter(|p| p.length() > 0.0)
                .collect();
            pieces.sort_by(|x, y| x.start_order(y));
            pre.extend(pieces);
            if pre.len() > budget {
                return Err(RokhlinError::CellExplosion { depth, budget });
            }
        }
        level = overlay(&base, &pre);
        if level.len() > budget {
            return Err(RokhlinError::CellExplosion { depth, budget });
        }
    }
    let floors = IntervalUnion::normalize((0..d).flat_map(|l| map.preimage_iter(&hat_union, l).into_cells()));
    let mut good = Vec::new();
    let mut straddling = 0;
    for (j, c) in level.iter().enumerate() {
        let inside = floors.overlap_length(c);
        if inside >= c.length() {
            good.push(j);
        } else if inside > 0.0 {
            straddling += 1;
        }
    }
    let cells = level
        .into_iter()
        .enumerate()
        .map(|(j, interval)| Cell {
            interval,
            label: Label::single(j as u32),
        })
        .collect();
    Ok(QPartition {
        cells: IntervalPartition::new(domain, cells, None)?,
        good,
        epsilon: eps,
        height: d,
        a_hat_measure: mu.measure_of(&hat_union),
        a_hat,
        straddling,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QReport {
    /// (i) cells are intervals tiling Ω.
    pub intervals: bool,
    /// (ii) `Q_j ∩ T^{-k}Q_j` is null for good `j` and `1 ≤ k < d`.
    pub self_avoiding: bool,
    pub self_avoiding_failures: usize,
    /// (iii) `H(Q)` with its tail allowance.
    pub entropy: EntropyValue,
    pub entropy_finite: bool,
    /// (iv) `μ(good) ≥ 1 − ε`.
    pub good_measure: f64,
    pub covers: bool,
    /// `|μ(good) − d·μ(⋃Â_i)|`.
    pub floor_identity_gap: f64,
    /// Largest overlap between distinct floors `T^{-k}Â_u`.
    pub floor_overlap: f64,
    pub pass: bool,
}

/// Checks items (i)–(iv) of a Q-partition, exactly for (i), (ii) and the
/// floor identities.
pub fn verify_q_partition(map: &PiecewiseMonotoneMap, mu: &InvariantMeasure, q: &QPartition) -> QReport {
    let cells = q.cells.cells();
    let rebuilt = IntervalPartition::new(q.cells.domain(), cells.to_vec(), q.cells.tail().cloned());
    let intervals = rebuilt.is_ok() && q.straddling == 0;
    let d = q.height;
    let failures: usize = q
        .good
        .par_iter()
        .filter(|&&j| {
            let c = IntervalUnion::from(cells[j].interval);
            let mut pre = c.clone();
            (1..d).any(|_| {
                pre = map.preimage(&pre).resolved;
                pre.intersect(&c).length() > 0.0
            })
        })
        .count();
    let entropy = mu.shannon_entropy(&q.cells);
    let entropy_finite = entropy.value.is_finite() && entropy.tail_bound.is_finite();
    let good_measure = mu.measure_of(&q.good_union());
    let covers = good_measure >= 1.0 - q.epsilon;
    // floors T^{-k}Â_u, tagged, checked pairwise by a sweep
    let mut pieces: Vec<Interval> = Vec::new();
    for hat in &q.a_hat {
        for k in 0..d {
            pieces.extend(map.preimage_iter(hat, k).into_cells());
        }
    }
    pieces.sort_by(|x, y| x.start_order(y));
    let mut floor_overlap: f64 = 0.0;
    let mut reach = Interval::EMPTY;
    for p in &pieces {
        floor_overlap = floor_overlap.max(reach.intersect(p).length());
        if reach.is_empty() || p.hi() > reach.hi() {
            reach = *p;
        }
    }
    let floor_identity_gap = (good_measure - d as f64 * q.a_hat_measure).abs();
    let self_avoiding = failures == 0;
    QReport {
        intervals,
        self_avoiding,
        self_avoiding_failures: failures,
        entropy,
        entropy_finite,
        good_measure,
        covers,
        floor_identity_gap,
        floor_overlap,
        pass: intervals && self_avoiding && entropy_finite && covers,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitReport {
    pub windows: u64,
    pub n: usize,
    pub height: usize,
    /// `⌊(n − 2)/d⌋ + 1`.
    pub bound: usize,
    pub max_visits: usize,
    pub violations: u64,
    /// Index of the first violating window.
    pub first_violation: Option<u64>,
    pub exact_windows: bool,
}

/// Counts visits of `T^s ω` to `B` for `s ≤ n − 2` over `samples` windows.
pub fn visit_bound_check(
    map: &PiecewiseMonotoneMap,
    mu: &InvariantMeasure,
    base: &IntervalUnion,
    d: usize,
    n: usize,
    samples: u64,
    seed: u64,
) -> VisitReport {
    let dyadic = map.is_piecewise_linear()
        && matches!(
            map.builtin_kind(),
            Some(crate::maps::Builtin::Doubling | crate::maps::Builtin::Tent)
        )
        && mu.is_unit_lebesgue();
    let words = if dyadic {
        PiecewiseMonotoneMap::dyadic_words(n)
    } else {
        1
    };
    let bound = if n >= 2 { (n - 2) / d.max(1) + 1 } else { 0 };
    let visits: Vec<usize> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::at(seed, streams::VISIT_WINDOWS, i, words);
            let mut w = vec![0.0; n];
            if dyadic {
                map.dyadic_window(&mut rng, &mut w);
            } else if map.orbit_window(mu.quantile(rng.uniform()), &mut w).is_err() {
                return 0;
            }
            w[..n.saturating_sub(1)].iter().filter(|&&x| base.contains(x)).count()
        })
        .collect();
    let violations = visits.iter().filter(|&&v| v > bound).count() as u64;
    VisitReport {
        windows: samples,
        n,
        height: d,
        bound,
        max_visits: visits.iter().copied().max().unwrap_or(0),
        violations,
        first_violation: visits.iter().position(|&v| v > bound).map(|p| p as u64),
        exact_windows: dyadic,
    }
}
