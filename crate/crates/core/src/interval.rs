//! Intervals, finite unions of intervals, and interval partitions.
//!
//! Every measure in this crate is non-atomic, so endpoint flags are tracked
//! for set semantics but never change a length or a probability. Comparisons
//! between unions are done on the length of the symmetric difference.
//!
//! A countable partition (for example the monotony partition of the Gauss
//! map) is stored as a finite list of resolved cells plus one aggregated
//! [`TailCell`] whose measure is bounded by the caller.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Symmetric-difference tolerance (in domain length) for `split_by` and
/// partition validation.
pub const SPLIT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("partitions live on different domains: {0} vs {1}")]
    DomainMismatch(Interval, Interval),
    #[error("set is not a union of partition cells: cell {label} ({cell}) straddles its boundary by {overlap:e}")]
    NotInSigmaAlgebra { label: Label, cell: Interval, overlap: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("tail cells {0} and {1} do not form a single interval")]
    TailMismatch(Interval, Interval),
    #[error("malformed interval JSON: {0}")]
    Json(String),
}

/// An interval of the real line with explicit endpoint topology.
///
/// The empty set has a single canonical representation, [`Interval::EMPTY`].
/// A degenerate interval with `lo == hi` is either the closed singleton
/// `[x, x]` or empty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: 0.0,
        hi: 0.0,
        lo_closed: false,
        hi_closed: false,
    };

    // negated comparisons also reject NaN endpoints
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        if !(lo <= hi) || (lo == hi && !(lo_closed && hi_closed)) {
            return Self::EMPTY;
        }
        Interval {
            lo,
            hi,
            // infinite endpoints are never attained
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    /// `[lo, hi)`
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, false)
    }

    /// `(lo, hi]`
    pub fn left_open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x, true, true)
    }

    pub fn everything() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::EMPTY
    }

    pub fn is_singleton(&self) -> bool {
        !self.is_empty() && self.lo == self.hi
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// True when `other` is a subset of `self` as a set.
    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || self.intersect(other) == *other
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Self::EMPTY;
        }
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Greater) => (self.lo, self.lo_closed),
            Some(Ordering::Less) => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Less) => (self.hi, self.hi_closed),
            Some(Ordering::Greater) => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed && other.hi_closed),
        };
        Interval::new(lo, hi, lo_closed, hi_closed)
    }

    /// `self \ other` as a left piece and a right piece (either may be empty).
    pub fn difference(&self, other: &Interval) -> (Interval, Interval) {
        let cut = self.intersect(other);
        if cut.is_empty() {
            return (*self, Self::EMPTY);
        }
        let left = Interval::new(self.lo, cut.lo, self.lo_closed, !cut.lo_closed);
        let right = Interval::new(cut.hi, self.hi, !cut.hi_closed, self.hi_closed);
        (left, right)
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Less) => (self.lo, self.lo_closed),
            Some(Ordering::Greater) => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed || other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Greater) => (self.hi, self.hi_closed),
            Some(Ordering::Less) => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed || other.hi_closed),
        };
        Interval::new(lo, hi, lo_closed, hi_closed)
    }

    /// Whether `self ∪ next` is an interval, given `self` starts no later than `next`.
    fn joins(&self, next: &Interval) -> bool {
        next.lo < self.hi || (next.lo == self.hi && (self.hi_closed || next.lo_closed))
    }

    /// Equality up to endpoint flags.
    pub fn same_extent(&self, other: &Interval) -> bool {
        self.is_empty() == other.is_empty() && self.lo == other.lo && self.hi == other.hi
    }

    pub fn start_order(&self, other: &Interval) -> Ordering {
        self.lo
            .total_cmp(&other.lo)
            .then_with(|| other.lo_closed.cmp(&self.lo_closed))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// A finite union of intervals in maximal normal form: sorted, pairwise
/// disjoint, no two cells joinable into one interval.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct IntervalUnion {
    cells: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn normalize<I: IntoIterator<Item = Interval>>(raw: I) -> Self {
        let mut items: Vec<Interval> = raw.into_iter().filter(|c| !c.is_empty()).collect();
        items.sort_by(|a, b| a.start_order(b));
        let mut cells: Vec<Interval> = Vec::with_capacity(items.len());
        for c in items {
            match cells.last_mut() {
                Some(last) if last.joins(&c) => *last = last.hull(&c),
                _ => cells.push(c),
            }
        }
        IntervalUnion { cells }
    }

    pub fn cells(&self) -> &[Interval] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<Interval> {
        self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Total Lebesgue length.
    pub fn length(&self) -> f64 {
        self.cells.iter().fold(0.0, |acc, c| acc + c.length())
    }

    pub fn hull(&self) -> Interval {
        match (self.cells.first(), self.cells.last()) {
            (Some(a), Some(b)) => a.hull(b),
            _ => Interval::EMPTY,
        }
    }

    /// Index of the first cell whose upper end is not below `x`.
    fn first_reaching(&self, x: f64) -> usize {
        self.cells.partition_point(|c| c.hi < x)
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.first_reaching(x);
        self.cells[i..].iter().take(2).any(|c| c.contains(x))
    }

    /// Cells of `self` meeting `probe`, located by binary search.
    pub fn overlapping<'a>(&'a self, probe: &'a Interval) -> impl Iterator<Item = &'a Interval> + 'a {
        let start = if probe.is_empty() {
            self.cells.len()
        } else {
            self.first_reaching(probe.lo)
        };
        self.cells[start..]
            .iter()
            .take_while(move |c| c.lo <= probe.hi)
            .filter(move |c| !c.intersect(probe).is_empty())
    }

    pub fn intersects(&self, probe: &Interval) -> bool {
        self.overlapping(probe).next().is_some()
    }

    /// Length of `self ∩ probe`.
    pub fn overlap_length(&self, probe: &Interval) -> f64 {
        self.overlapping(probe).map(|c| c.intersect(probe).length()).sum()
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        Self::normalize(self.cells.iter().chain(other.cells.iter()).copied())
    }

    pub fn intersect(&self, other: &IntervalUnion) -> IntervalUnion {
        let (a, b) = (&self.cells, &other.cells);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let x = a[i].intersect(&b[j]);
            if !x.is_empty() {
                out.push(x);
            }
            let a_first = match a[i].hi.total_cmp(&b[j].hi) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => !a[i].hi_closed || b[j].hi_closed,
            };
            if a_first {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalize(out)
    }

    pub fn intersect_interval(&self, probe: &Interval) -> IntervalUnion {
        Self::normalize(self.overlapping(probe).map(|c| c.intersect(probe)))
    }

    /// Complement with respect to the whole real line.
    pub fn complement(&self) -> IntervalUnion {
        let mut out = Vec::with_capacity(self.cells.len() + 1);
        let mut lo = f64::NEG_INFINITY;
        let mut lo_closed = false;
        for c in &self.cells {
            out.push(Interval::new(lo, c.lo, lo_closed, !c.lo_closed));
            lo = c.hi;
            lo_closed = !c.hi_closed;
        }
        out.push(Interval::new(lo, f64::INFINITY, lo_closed, false));
        Self::normalize(out)
    }

    pub fn difference(&self, other: &IntervalUnion) -> IntervalUnion {
        if other.is_empty() {
            return self.clone();
        }
        self.intersect(&other.complement())
    }

    pub fn symmetric_difference_length(&self, other: &IntervalUnion) -> f64 {
        self.difference(other).length() + other.difference(self).length()
    }

    /// Set equality up to a null set of length at most `tol`.
    pub fn approx_eq(&self, other: &IntervalUnion, tol: f64) -> bool {
        self.symmetric_difference_length(other) <= tol
    }

    pub fn is_null(&self) -> bool {
        self.length() == 0.0
    }
}

impl From<Interval> for IntervalUnion {
    fn from(i: Interval) -> Self {
        Self::normalize([i])
    }
}

impl FromIterator<Interval> for IntervalUnion {
    fn from_iter<I: IntoIterator<Item = Interval>>(iter: I) -> Self {
        Self::normalize(iter)
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cells.is_empty() {
            return write!(f, "∅");
        }
        for (k, c) in self.cells.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Cell label. Refinement concatenates labels, so a cell of `P ∨ Q` carries
/// `(i, j)` when it came from `P_i ∩ Q_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub Vec<u32>);

impl Label {
    pub fn single(i: u32) -> Self {
        Label(vec![i])
    }

    pub fn join(&self, other: &Label) -> Label {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Label(v)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub interval: Interval,
    pub label: Label,
}

/// Aggregated remainder of a countable partition.
///
/// `measure_bound` bounds the invariant measure of the whole tail region;
/// `entropy_bound`, when known, bounds `Σ φ(μ(C))` over the unresolved cells
/// `C` hidden inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct TailCell {
    pub interval: Interval,
    pub measure_bound: f64,
    pub entropy_bound: Option<f64>,
}

/// A partition of an ambient interval into interval cells, optionally with an
/// aggregated tail.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPartition {
    domain: Interval,
    cells: Vec<Cell>,
    tail: Option<TailCell>,
}

impl IntervalPartition {
    /// Validates disjointness and coverage of `domain` up to a null set.
    pub fn new(domain: Interval, mut cells: Vec<Cell>, tail: Option<TailCell>) -> Result<Self, IntervalError> {
        cells.retain(|c| !c.interval.is_empty());
        cells.sort_by(|a, b| a.interval.start_order(&b.interval));
        let scale = domain.length().max(1.0);
        let mut covered = 0.0;
        for pair in cells.windows(2) {
            let overlap = pair[0].interval.intersect(&pair[1].interval);
            if overlap.length() > SPLIT_TOL * scale {
                return Err(IntervalError::InvalidPartition(format!(
                    "cells {} and {} overlap on {}",
                    pair[0].label, pair[1].label, overlap
                )));
            }
        }
        for c in &cells {
            let inside = c.interval.intersect(&domain).length();
            if c.interval.length() - inside > SPLIT_TOL * scale {
                return Err(IntervalError::InvalidPartition(format!(
                    "cell {} = {} leaves the domain {}",
                    c.label, c.interval, domain
                )));
            }
            covered += c.interval.length();
        }
        if let Some(t) = &tail {
            if t.measure_bound < 0.0 || !t.measure_bound.is_finite() {
                return Err(IntervalError::InvalidPartition(
                    "tail measure bound must be finite and ≥ 0".into(),
                ));
            }
            let clash: f64 = cells.iter().map(|c| c.interval.intersect(&t.interval).length()).sum();
            if clash > SPLIT_TOL * scale {
                return Err(IntervalError::InvalidPartition("tail overlaps resolved cells".into()));
            }
            covered += t.interval.length();
        }
        let gap = domain.length() - covered;
        if gap.abs() > SPLIT_TOL * scale * (1.0 + cells.len() as f64).sqrt() {
            return Err(IntervalError::InvalidPartition(format!(
                "cells cover {covered} of domain length {}",
                domain.length()
            )));
        }
        Ok(IntervalPartition { domain, cells, tail })
    }

    /// The one-cell partition `{Ω}`.
    pub fn trivial(domain: Interval) -> Self {
        IntervalPartition {
            domain,
            cells: vec![Cell {
                interval: domain,
                label: Label::single(0),
            }],
            tail: None,
        }
    }

    /// Cells `[b_0, b_1), …, [b_{k-1}, b_k]` labelled `0..k`.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_breakpoints(breaks: &[f64]) -> Result<Self, IntervalError> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(IntervalError::InvalidPartition(
                "breakpoints must be strictly increasing and at least two".into(),
            ));
        }
        let last = breaks.len() - 2;
        let cells = breaks
            .windows(2)
            .enumerate()
            .map(|(i, w)| Cell {
                interval: Interval::new(w[0], w[1], true, i == last),
                label: Label::single(i as u32),
            })
            .collect();
        Self::new(Interval::closed(breaks[0], breaks[breaks.len() - 1]), cells, None)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn tail(&self) -> Option<&TailCell> {
        self.tail.as_ref()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the resolved cell containing `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let i = self.cells.partition_point(|c| c.interval.hi < x);
        (i..self.cells.len().min(i + 2)).find(|&k| self.cells[k].interval.contains(x))
    }

    pub fn in_tail(&self, x: f64) -> bool {
        self.tail.as_ref().is_some_and(|t| t.interval.contains(x))
    }

    /// Union of the resolved cells.
    pub fn resolved_union(&self) -> IntervalUnion {
        IntervalUnion::normalize(self.cells.iter().map(|c| c.interval))
    }

    /// `P ∨ Q`: all nonempty intersections `P_i ∩ Q_j`, labelled `(i, j)`.
    /// Tails merge into a single aggregated tail.
    pub fn refine(&self, other: &IntervalPartition) -> Result<IntervalPartition, IntervalError> {
        if !self.domain.same_extent(&other.domain) {
            return Err(IntervalError::DomainMismatch(self.domain, other.domain));
        }
        let tail = match (&self.tail, &other.tail) {
            (None, None) => None,
            (Some(t), None) | (None, Some(t)) => Some(t.clone()),
            (Some(a), Some(b)) => {
                let (first, second) = if a.interval.start_order(&b.interval).is_le() {
                    (a, b)
                } else {
                    (b, a)
                };
                if !first.interval.joins(&second.interval) {
                    return Err(IntervalError::TailMismatch(a.interval, b.interval));
                }
                Some(TailCell {
                    interval: a.interval.hull(&b.interval),
                    measure_bound: a.measure_bound + b.measure_bound,
                    entropy_bound: a.entropy_bound.zip(b.entropy_bound).map(|(x, y)| x + y),
                })
            }
        };
        let (a, b) = (&self.cells, &other.cells);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() && j < b.len() {
            let x = a[i].interval.intersect(&b[j].interval);
            if !x.is_empty() {
                let label = a[i].label.join(&b[j].label);
                match &tail {
                    Some(t) => {
                        let (l, r) = x.difference(&t.interval);
                        for piece in [l, r] {
                            if !piece.is_empty() {
                                out.push(Cell {
                                    interval: piece,
                                    label: label.clone(),
                                });
                            }
                        }
                    }
                    None => out.push(Cell { interval: x, label }),
                }
            }
            let (ai, bj) = (&a[i].interval, &b[j].interval);
            let a_first = match ai.hi.total_cmp(&bj.hi) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => !ai.hi_closed || bj.hi_closed,
            };
            if a_first {
                i += 1;
            } else {
                j += 1;
            }
        }
        out.sort_by(|x, y| x.interval.start_order(&y.interval));
        Ok(IntervalPartition {
            domain: self.domain,
            cells: out,
            tail,
        })
    }

    /// `split(A | P)`: the cells of `P` whose union is `A`.
    ///
    /// A cell is taken when it lies inside `A` and skipped when it misses `A`,
    /// both up to [`SPLIT_TOL`] in length. Anything in between means `A` is
    /// not in the σ-algebra generated by the partition.
    pub fn split_by(&self, a: &IntervalUnion) -> Result<Vec<(Label, Interval)>, IntervalError> {
        let mut picked = Vec::new();
        for c in &self.cells {
            let len = c.interval.length();
            if len == 0.0 {
                if a.contains(c.interval.lo) {
                    picked.push((c.label.clone(), c.interval));
                }
                continue;
            }
            let inside = a.overlap_length(&c.interval);
            let outside = len - inside;
            if outside <= SPLIT_TOL {
                picked.push((c.label.clone(), c.interval));
            } else if inside > SPLIT_TOL {
                return Err(IntervalError::NotInSigmaAlgebra {
                    label: c.label.clone(),
                    cell: c.interval,
                    overlap: inside.min(outside),
                });
            }
        }
        if let Some(t) = &self.tail {
            let inside = a.overlap_length(&t.interval);
            let outside = t.interval.length() - inside;
            if inside > SPLIT_TOL && outside > SPLIT_TOL {
                return Err(IntervalError::NotInSigmaAlgebra {
                    label: Label::default(),
                    cell: t.interval,
                    overlap: inside.min(outside),
                });
            }
        }
        Ok(picked)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut records: Vec<CellRecord> = self
            .cells
            .iter()
            .map(|c| CellRecord::from_interval(&c.interval, Some(c.label.clone())))
            .collect();
        if let Some(t) = &self.tail {
            let mut r = CellRecord::from_interval(&t.interval, None);
            r.tail = true;
            r.measure_bound = Some(t.measure_bound);
            r.entropy_bound = t.entropy_bound;
            records.push(r);
        }
        serde_json::to_value(records).expect("cell records serialize")
    }

    /// Reads the cell-array format written by [`IntervalPartition::to_json`];
    /// the domain is the hull of all cells.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, IntervalError> {
        let records: Vec<CellRecord> =
            serde_json::from_value(value.clone()).map_err(|e| IntervalError::Json(e.to_string()))?;
        let mut cells = Vec::new();
        let mut tail = None;
        let mut domain = Interval::EMPTY;
        for (k, r) in records.into_iter().enumerate() {
            let interval = r.interval();
            domain = domain.hull(&interval);
            if r.tail {
                tail = Some(TailCell {
                    interval,
                    measure_bound: r
                        .measure_bound
                        .ok_or_else(|| IntervalError::Json("tail cell without measure_bound".into()))?,
                    entropy_bound: r.entropy_bound,
                });
            } else {
                cells.push(Cell {
                    interval,
                    label: r.label.unwrap_or_else(|| Label::single(k as u32)),
                });
            }
        }
        Self::new(domain, cells, tail)
    }
}

pub fn union_to_json(u: &IntervalUnion) -> serde_json::Value {
    let records: Vec<CellRecord> = u.cells().iter().map(|c| CellRecord::from_interval(c, None)).collect();
    serde_json::to_value(records).expect("cell records serialize")
}

pub fn union_from_json(value: &serde_json::Value) -> Result<IntervalUnion, IntervalError> {
    let records: Vec<CellRecord> =
        serde_json::from_value(value.clone()).map_err(|e| IntervalError::Json(e.to_string()))?;
    Ok(IntervalUnion::normalize(records.iter().map(CellRecord::interval)))
}

#[derive(Serialize, Deserialize)]
struct CellRecord {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    tail: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measure_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entropy_bound: Option<f64>,
}

impl CellRecord {
    fn from_interval(i: &Interval, label: Option<Label>) -> Self {
        CellRecord {
            lo: i.lo,
            hi: i.hi,
            lo_closed: i.lo_closed,
            hi_closed: i.hi_closed,
            label,
            tail: false,
            measure_bound: None,
            entropy_bound: None,
        }
    }

    fn interval(&self) -> Interval {
        Interval::new(self.lo, self.hi, self.lo_closed, self.hi_closed)
    }
}
