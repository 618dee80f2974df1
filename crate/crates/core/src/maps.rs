//! Piecewise monotone interval maps.
//!
//! A map is an ordered list of [`MonotoneBranch`]es whose domains partition
//! the ambient interval Ω. That list is the monotony partition `M`. The
//! Gauss map has countably many branches; it is truncated at `N_max`
//! branches, and everything below `1/(N_max+1)` is one aggregated tail region
//! with certified measure and entropy bounds.
//!
//! Branch labels are dense: `0..k` for finite maps and `0..=N_max` for Gauss,
//! where label `0` is the null cell `{0}` and label `n ≥ 1` is the cell
//! `[1/(n+1), 1/n)`. The tail uses [`TAIL_LABEL`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{Cell, Interval, IntervalError, IntervalPartition, IntervalUnion, Label, TailCell};
use crate::measures::{gauss_tail_entropy_bound, InvariantMeasure};
use crate::rng::CounterRng;

/// Branch label reported for points in the unresolved Gauss tail.
pub const TAIL_LABEL: u32 = u32::MAX;

/// Default Gauss truncation.
pub const DEFAULT_GAUSS_N_MAX: u32 = 10_000;

const BISECTION_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("{x} lies outside the domain {domain}")]
    OutOfDomain { x: f64, domain: Interval },
    #[error("unknown map '{0}' (expected one of doubling, tent, logistic, gauss)")]
    UnknownMap(String),
    #[error("invalid map parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed custom map: {0}")]
    MalformedSpec(String),
    #[error("piece {index} on [{x0}, {x1}] has zero slope")]
    ZeroSlope { index: usize, x0: f64, x1: f64 },
    #[error("label {0} is not a branch of this map")]
    UnknownLabel(u32),
    #[error("word uses the unresolved tail; refine N_max")]
    TailWord,
    #[error(transparent)]
    Partition(#[from] IntervalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum BranchKind {
    /// `y = y0 + (x - x0) * slope`
    Affine { x0: f64, y0: f64, slope: f64 },
    /// `y = 1/x - n` on `[1/(n+1), 1/n)`
    Gauss { n: u32 },
    /// `4x(1-x)` on `[0, 1/2)`
    LogisticLeft,
    /// `4x(1-x)` on `[1/2, 1]`
    LogisticRight,
    /// A branch on a singleton cell.
    Constant { value: f64 },
    /// Arbitrary continuous monotone function; inverse by bisection.
    Custom(RealFn),
}

/// One monotone piece of a map together with its domain cell.
#[derive(Clone)]
pub struct MonotoneBranch {
    label: u32,
    domain: Interval,
    direction: Direction,
    kind: BranchKind,
    range: Interval,
}

impl fmt::Debug for MonotoneBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneBranch")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("direction", &self.direction)
            .field("range", &self.range)
            .finish()
    }
}

impl MonotoneBranch {
    fn with_kind(label: u32, domain: Interval, direction: Direction, kind: BranchKind) -> Self {
        let mut b = MonotoneBranch {
            label,
            domain,
            direction,
            kind,
            range: Interval::EMPTY,
        };
        b.range = b.image(&domain);
        b
    }

    /// Affine branch through `(x0, y0)` and `(x1, y1)` on `domain`.
    pub fn affine(label: u32, domain: Interval, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        let direction = if slope > 0.0 {
            Direction::Increasing
        } else {
            Direction::Decreasing
        };
        Self::with_kind(label, domain, direction, BranchKind::Affine { x0, y0, slope })
    }

    /// Continuous monotone branch given only by its forward map.
    pub fn custom(label: u32, domain: Interval, direction: Direction, f: RealFn) -> Self {
        Self::with_kind(label, domain, direction, BranchKind::Custom(f))
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Image of the whole domain.
    pub fn range(&self) -> Interval {
        self.range
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, BranchKind::Affine { .. } | BranchKind::Constant { .. })
    }

    /// Forward map, without a domain check.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { x0, y0, slope } => y0 + (x - x0) * slope,
            BranchKind::Gauss { n } => (1.0 / x - f64::from(*n)).clamp(0.0, 1.0),
            BranchKind::LogisticLeft | BranchKind::LogisticRight => 4.0 * x * (1.0 - x),
            BranchKind::Constant { value } => *value,
            BranchKind::Custom(f) => f(x),
        }
    }

    /// The point of the closed domain mapped to `y`, for `y` in the closed range.
    pub fn inverse(&self, y: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { x0, y0, slope } => x0 + (y - y0) / slope,
            BranchKind::Gauss { n } => 1.0 / (f64::from(*n) + y),
            // (1 ∓ √(1-y))/2 written to avoid cancellation
            BranchKind::LogisticLeft => y / (2.0 * (1.0 + (1.0 - y).max(0.0).sqrt())),
            BranchKind::LogisticRight => 0.5 * (1.0 + (1.0 - y).max(0.0).sqrt()),
            BranchKind::Constant { .. } => self.domain.lo(),
            BranchKind::Custom(f) => {
                let (mut lo, mut hi) = (self.domain.lo(), self.domain.hi());
                let up = self.direction == Direction::Increasing;
                while hi - lo > BISECTION_TOL {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) < y) == up {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if mid == lo && mid == hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// `|T'(x)|` where a closed form is known.
    pub fn derivative_abs(&self, x: f64) -> Option<f64> {
        match &self.kind {
            BranchKind::Affine { slope, .. } => Some(slope.abs()),
            BranchKind::Gauss { .. } => Some(1.0 / (x * x)),
            BranchKind::LogisticLeft | BranchKind::LogisticRight => Some((4.0 - 8.0 * x).abs()),
            BranchKind::Constant { .. } => Some(0.0),
            BranchKind::Custom(_) => None,
        }
    }

    /// `branch(J ∩ domain)`, an interval by monotonicity and continuity.
    pub fn image(&self, j: &Interval) -> Interval {
        let x = j.intersect(&self.domain);
        if x.is_empty() {
            return Interval::EMPTY;
        }
        if let BranchKind::Constant { value } = self.kind {
            return Interval::point(value);
        }
        let (a, b) = (self.eval(x.lo()), self.eval(x.hi()));
        match self.direction {
            Direction::Increasing => Interval::new(a, b, x.lo_closed(), x.hi_closed()),
            Direction::Decreasing => Interval::new(b, a, x.hi_closed(), x.lo_closed()),
        }
    }

    /// `domain ∩ T^{-1}(J)`.
    pub fn preimage(&self, j: &Interval) -> Interval {
        let y = j.intersect(&self.range);
        if y.is_empty() {
            return Interval::EMPTY;
        }
        if self.domain.is_singleton() {
            return self.domain;
        }
        let raw = match self.direction {
            Direction::Increasing => {
                Interval::new(self.inverse(y.lo()), self.inverse(y.hi()), y.lo_closed(), y.hi_closed())
            }
            Direction::Decreasing => {
                Interval::new(self.inverse(y.hi()), self.inverse(y.lo()), y.hi_closed(), y.lo_closed())
            }
        };
        raw.intersect(&self.domain)
    }
}

/// Builtin maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Builtin {
    Doubling,
    Tent,
    Logistic,
    Gauss { n_max: u32 },
}

impl Builtin {
    pub const NAMES: [&'static str; 4] = ["doubling", "tent", "logistic", "gauss"];

    pub fn from_name(name: &str, gauss_n_max: Option<u32>) -> Result<Self, MapError> {
        match name {
            "doubling" => Ok(Builtin::Doubling),
            "tent" => Ok(Builtin::Tent),
            "logistic" => Ok(Builtin::Logistic),
            "gauss" => Ok(Builtin::Gauss {
                n_max: gauss_n_max.unwrap_or(DEFAULT_GAUSS_N_MAX),
            }),
            other => Err(MapError::UnknownMap(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Doubling => "doubling",
            Builtin::Tent => "tent",
            Builtin::Logistic => "logistic",
            Builtin::Gauss { .. } => "gauss",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Builtin::Doubling => "2x mod 1 on [0,1]; Lebesgue measure",
            Builtin::Tent => "1 - |2x - 1| on [0,1]; Lebesgue measure",
            Builtin::Logistic => "4x(1-x) on [0,1]; arcsine measure",
            Builtin::Gauss { .. } => "1/x mod 1 on [0,1] (0 at 0); Gauss measure, truncated at n_max branches",
        }
    }

    /// The invariant measure the map is usually paired with.
    pub fn invariant_measure(&self) -> InvariantMeasure {
        match self {
            Builtin::Doubling | Builtin::Tent => InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 },
            Builtin::Logistic => InvariantMeasure::Arcsine,
            Builtin::Gauss { .. } => InvariantMeasure::Gauss,
        }
    }
}

/// Unresolved part of the Gauss monotony partition: the cells `n > n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussTail {
    pub n_max: u32,
    pub interval: Interval,
    /// Gauss measure of the tail region, `log2(1 + 1/(n_max+1))`.
    pub measure_bound: f64,
    /// Bound on `Σ_{n > n_max} φ(μ_n)`.
    pub entropy_bound: f64,
}

impl GaussTail {
    /// Gauss measure of `T^{-1}(A) ∩ tail`; the per-cell sum telescopes to
    /// `log2((n_max+1+b)/(n_max+1+a))` for each `[a, b]` in `A`.
    pub fn preimage_measure(&self, a: &IntervalUnion) -> f64 {
        let m = f64::from(self.n_max) + 1.0;
        a.cells()
            .iter()
            .map(|c| {
                let c = c.intersect(&Interval::closed(0.0, 1.0));
                if c.is_empty() {
                    0.0
                } else {
                    (c.length() / (m + c.lo())).ln_1p() / std::f64::consts::LN_2
                }
            })
            .sum()
    }
}

/// `T^{-1}(A)`, split into the exactly resolved part and a bounded tail.
#[derive(Clone, Debug, PartialEq)]
pub struct Preimage {
    pub resolved: IntervalUnion,
    pub tail: Option<TailCell>,
}

/// Piecewise-linear map description used by [`PiecewiseMonotoneMap::load_custom`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub domain: [f64; 2],
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

/// A piecewise monotone map on a compact interval.
#[derive(Clone, Debug)]
pub struct PiecewiseMonotoneMap {
    name: String,
    builtin: Option<Builtin>,
    domain: Interval,
    /// Sorted by domain.
    branches: Vec<MonotoneBranch>,
    /// `label -> index into branches`
    by_label: Vec<usize>,
    tail: Option<GaussTail>,
    partition: IntervalPartition,
}

impl PiecewiseMonotoneMap {
    /// Builds a map from branches; their domains must partition `domain`
    /// (up to the Gauss tail, when given).
    pub fn from_branches(
        name: impl Into<String>,
        domain: Interval,
        mut branches: Vec<MonotoneBranch>,
        tail: Option<GaussTail>,
    ) -> Result<Self, MapError> {
        branches.sort_by(|a, b| a.domain.lo().total_cmp(&b.domain.lo()));
        let mut by_label = vec![usize::MAX; branches.len()];
        for (i, b) in branches.iter().enumerate() {
            let slot = by_label
                .get_mut(b.label as usize)
                .ok_or_else(|| MapError::MalformedSpec(format!("labels must be 0..{}", branches.len())))?;
            if *slot != usize::MAX {
                return Err(MapError::MalformedSpec(format!("duplicate label {}", b.label)));
            }
            *slot = i;
            let r = b.range;
            if !r.is_empty() && (r.lo() < domain.lo() || r.hi() > domain.hi()) {
                return Err(MapError::MalformedSpec(format!(
                    "branch {} maps into {r}, outside {domain}",
                    b.label
                )));
            }
        }
        let cells = branches
            .iter()
            .map(|b| Cell {
                interval: b.domain,
                label: Label::single(b.label),
            })
            .collect();
        let tail_cell = tail.as_ref().map(|t| TailCell {
            interval: t.interval,
            measure_bound: t.measure_bound,
            entropy_bound: Some(t.entropy_bound),
        });
        let partition = IntervalPartition::new(domain, cells, tail_cell)?;
        Ok(PiecewiseMonotoneMap {
            name: name.into(),
            builtin: None,
            domain,
            branches,
            by_label,
            tail,
            partition,
        })
    }

    pub fn builtin(which: Builtin) -> Result<Self, MapError> {
        let unit = Interval::closed(0.0, 1.0);
        let left = Interval::half_open(0.0, 0.5);
        let right = Interval::closed(0.5, 1.0);
        let mut map = match which {
            Builtin::Doubling => Self::from_branches(
                "doubling",
                unit,
                vec![
                    MonotoneBranch::affine(0, left, 0.0, 0.5, 0.0, 1.0),
                    MonotoneBranch::affine(1, right, 0.5, 1.0, 0.0, 1.0),
                ],
                None,
            )?,
            Builtin::Tent => Self::from_branches(
                "tent",
                unit,
                vec![
                    MonotoneBranch::affine(0, left, 0.0, 0.5, 0.0, 1.0),
                    MonotoneBranch::affine(1, right, 0.5, 1.0, 1.0, 0.0),
                ],
                None,
            )?,
            Builtin::Logistic => Self::from_branches(
                "logistic",
                unit,
                vec![
                    MonotoneBranch::with_kind(0, left, Direction::Increasing, BranchKind::LogisticLeft),
                    MonotoneBranch::with_kind(1, right, Direction::Decreasing, BranchKind::LogisticRight),
                ],
                None,
            )?,
            Builtin::Gauss { n_max } => Self::gauss(n_max)?,
        };
        map.builtin = Some(which);
        Ok(map)
    }

    /// Builtin by CLI name; `gauss_n_max` applies to `gauss` only.
    pub fn by_name(name: &str, gauss_n_max: Option<u32>) -> Result<Self, MapError> {
        Self::builtin(Builtin::from_name(name, gauss_n_max)?)
    }

    fn gauss(n_max: u32) -> Result<Self, MapError> {
        if n_max < 1 {
            return Err(MapError::InvalidParameter("gauss needs n_max ≥ 1".into()));
        }
        let mut branches = Vec::with_capacity(n_max as usize + 1);
        branches.push(MonotoneBranch::with_kind(
            0,
            Interval::point(0.0),
            Direction::Increasing,
            BranchKind::Constant { value: 0.0 },
        ));
        for n in 1..=n_max {
            let nf = f64::from(n);
            let domain = Interval::new(1.0 / (nf + 1.0), 1.0 / nf, true, n == 1);
            branches.push(MonotoneBranch::with_kind(
                n,
                domain,
                Direction::Decreasing,
                BranchKind::Gauss { n },
            ));
        }
        let edge = 1.0 / (f64::from(n_max) + 1.0);
        let tail = GaussTail {
            n_max,
            interval: Interval::open(0.0, edge),
            measure_bound: edge.ln_1p() / std::f64::consts::LN_2,
            entropy_bound: gauss_tail_entropy_bound(n_max),
        };
        Self::from_branches("gauss", Interval::closed(0.0, 1.0), branches, Some(tail))
    }

    /// Piecewise-linear map from the JSON description
    /// `{"domain":[lo,hi], "pieces":[{"x0","x1","y0","y1"}, ...]}`.
    pub fn load_custom(json: &str) -> Result<Self, MapError> {
        let spec: CustomSpec = serde_json::from_str(json).map_err(|e| MapError::MalformedSpec(e.to_string()))?;
        Self::from_spec(&spec)
    }

    // negated comparisons also reject NaN coordinates
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_spec(spec: &CustomSpec) -> Result<Self, MapError> {
        let [lo, hi] = spec.domain;
        if !(lo < hi) {
            return Err(MapError::MalformedSpec("domain must satisfy lo < hi".into()));
        }
        let Some(first) = spec.pieces.first() else {
            return Err(MapError::MalformedSpec("no pieces".into()));
        };
        if first.x0 != lo || spec.pieces[spec.pieces.len() - 1].x1 != hi {
            return Err(MapError::MalformedSpec("pieces must span the domain".into()));
        }
        let last = spec.pieces.len() - 1;
        let mut branches = Vec::with_capacity(spec.pieces.len());
        for (i, p) in spec.pieces.iter().enumerate() {
            if !(p.x0 < p.x1) {
                return Err(MapError::MalformedSpec(format!("piece {i}: breakpoints must increase")));
            }
            if i > 0 && spec.pieces[i - 1].x1 != p.x0 {
                return Err(MapError::MalformedSpec(format!(
                    "piece {i} does not start where piece {} ends",
                    i - 1
                )));
            }
            if p.y0 == p.y1 {
                return Err(MapError::ZeroSlope {
                    index: i,
                    x0: p.x0,
                    x1: p.x1,
                });
            }
            let domain = Interval::new(p.x0, p.x1, true, i == last);
            branches.push(MonotoneBranch::affine(i as u32, domain, p.x0, p.x1, p.y0, p.y1));
        }
        let name = spec.name.clone().unwrap_or_else(|| "custom".into());
        Self::from_branches(name, Interval::closed(lo, hi), branches, None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin_kind(&self) -> Option<Builtin> {
        self.builtin
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn branches(&self) -> &[MonotoneBranch] {
        &self.branches
    }

    pub fn branch(&self, label: u32) -> Result<&MonotoneBranch, MapError> {
        self.by_label
            .get(label as usize)
            .map(|&i| &self.branches[i])
            .ok_or(MapError::UnknownLabel(label))
    }

    /// Number of resolved labels (`0..alphabet_size()`).
    pub fn alphabet_size(&self) -> usize {
        self.by_label.len()
    }

    /// Labels of branches with a nondegenerate domain.
    pub fn positive_labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .branches
            .iter()
            .filter(|b| b.domain.length() > 0.0)
            .map(|b| b.label)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn tail(&self) -> Option<&GaussTail> {
        self.tail.as_ref()
    }

    /// The monotony partition `M`.
    pub fn monotony_partition(&self) -> &IntervalPartition {
        &self.partition
    }

    /// True when every branch is affine, so preimages of dyadic sets stay exact.
    pub fn is_piecewise_linear(&self) -> bool {
        self.tail.is_none() && self.branches.iter().all(MonotoneBranch::is_affine)
    }

    fn index_of(&self, x: f64) -> Option<usize> {
        let i = self.branches.partition_point(|b| b.domain.hi() < x);
        (i..self.branches.len().min(i + 2)).find(|&k| self.branches[k].domain.contains(x))
    }

    pub fn branch_of(&self, x: f64) -> Result<u32, MapError> {
        if let Some(i) = self.index_of(x) {
            return Ok(self.branches[i].label);
        }
        match &self.tail {
            Some(t) if t.interval.contains(x) => Ok(TAIL_LABEL),
            _ => Err(self.out_of_domain(x)),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, MapError> {
        if let Some(i) = self.index_of(x) {
            return Ok(self.branches[i].eval(x));
        }
        match &self.tail {
            Some(t) if t.interval.contains(x) => {
                let inv = 1.0 / x;
                Ok((inv - inv.floor()).clamp(0.0, 1.0))
            }
            _ => Err(self.out_of_domain(x)),
        }
    }

    fn out_of_domain(&self, x: f64) -> MapError {
        MapError::OutOfDomain { x, domain: self.domain }
    }

    /// `T^{-1}(A) ∩ Ω`. Tail branches are not resolved; their contribution is
    /// reported as a tail cell whose measure bound is exact for the Gauss
    /// measure.
    pub fn preimage(&self, a: &IntervalUnion) -> Preimage {
        let mut pieces = Vec::new();
        for b in &self.branches {
            for c in a.overlapping(&b.range) {
                let p = b.preimage(c);
                if !p.is_empty() {
                    pieces.push(p);
                }
            }
        }
        let tail = self.tail.as_ref().and_then(|t| {
            let m = t.preimage_measure(a);
            (m > 0.0).then_some(TailCell {
                interval: t.interval,
                measure_bound: m,
                entropy_bound: None,
            })
        });
        Preimage {
            resolved: IntervalUnion::normalize(pieces),
            tail,
        }
    }

    /// `T^{-k}(A)`, resolved part only.
    pub fn preimage_iter(&self, a: &IntervalUnion, k: usize) -> IntervalUnion {
        (0..k).fold(a.clone(), |acc, _| self.preimage(&acc).resolved)
    }

    /// `T(A)`, resolved branches only.
    pub fn forward_image(&self, a: &IntervalUnion) -> IntervalUnion {
        let mut pieces = Vec::new();
        for b in &self.branches {
            for c in a.overlapping(&b.domain) {
                pieces.push(b.image(c));
            }
        }
        IntervalUnion::normalize(pieces)
    }

    /// `M(w) = ⋂_k T^{-k}(M_{w_k})`, built backwards with branch inverses.
    pub fn cylinder(&self, word: &[u32]) -> Result<IntervalUnion, MapError> {
        Ok(IntervalUnion::from(self.cylinder_interval(word)?))
    }

    /// [`cylinder`](Self::cylinder) as a single interval (branches are continuous).
    pub fn cylinder_interval(&self, word: &[u32]) -> Result<Interval, MapError> {
        let Some((&last, rest)) = word.split_last() else {
            return Ok(self.domain);
        };
        if word.contains(&TAIL_LABEL) {
            return Err(MapError::TailWord);
        }
        let mut j = self.branch(last)?.domain;
        for &l in rest.iter().rev() {
            if j.is_empty() {
                break;
            }
            j = self.branch(l)?.preimage(&j);
        }
        Ok(j)
    }

    /// `(x, T x, …, T^{n-1} x)` by floating-point iteration.
    pub fn orbit_window(&self, x: f64, out: &mut [f64]) -> Result<(), MapError> {
        let mut y = x;
        for slot in out.iter_mut() {
            *slot = y;
            y = self.eval(y)?;
        }
        Ok(())
    }

    /// Number of 64-bit random words an exact dyadic window of length `n` uses.
    pub fn dyadic_words(n: usize) -> u64 {
        (n as u64 + DYADIC_BITS as u64).div_ceil(64)
    }

    /// Fills `out` with an orbit window of a Lebesgue-distributed point under
    /// doubling or tent, computed exactly from a random bit stream.
    ///
    /// `out[s]` is the midpoint of the depth-52 dyadic cell holding `T^s ω`,
    /// so dyadic set membership and strict order are exact; equal values mean
    /// the two iterates agree in 52 bits. Returns `false` for other maps.
    pub fn dyadic_window(&self, rng: &mut CounterRng, out: &mut [f64]) -> bool {
        let tent = match self.builtin {
            Some(Builtin::Doubling) => false,
            Some(Builtin::Tent) => true,
            _ => return false,
        };
        let words = Self::dyadic_words(out.len()) as usize;
        let mut bits = [0u64; 8];
        let mut heap = Vec::new();
        let stream: &mut [u64] = if words <= bits.len() {
            &mut bits[..words]
        } else {
            heap.resize(words, 0);
            &mut heap
        };
        for w in stream.iter_mut() {
            *w = rng.next_u64();
        }
        let bit = |i: usize| (stream[i / 64] >> (63 - i % 64)) & 1;
        let scale = 1.0 / (1u64 << DYADIC_BITS) as f64;
        for (s, slot) in out.iter_mut().enumerate() {
            let mut k = 0u64;
            for i in s..s + DYADIC_BITS {
                k = (k << 1) | bit(i);
            }
            // the tent orbit is the shifted stream, complemented when the bit
            // just shifted out was 1
            if tent && s > 0 && bit(s - 1) == 1 {
                k ^= (1u64 << DYADIC_BITS) - 1;
            }
            *slot = (k as f64 + 0.5) * scale;
        }
        true
    }
}

const DYADIC_BITS: usize = 52;
