//! Invariant measures, partition entropy, and sampling.
//!
//! Measures are absolutely continuous and given in closed form, so the mass
//! of an interval union is exact up to floating-point rounding. Entropies
//! are in nats unless converted with [`EntropyValue::in_base`].

use std::f64::consts::{FRAC_2_PI, LN_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalPartition, IntervalUnion};
use crate::maps::PiecewiseMonotoneMap;
use crate::rng::{streams, CounterRng};

const SAMPLE_CHUNK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum InvariantMeasure {
    /// Normalized Lebesgue measure on `[lo, hi]`.
    Lebesgue { lo: f64, hi: f64 },
    /// Density `1/((1+x) ln 2)` on `[0, 1]`.
    Gauss,
    /// Density `1/(π √(x(1-x)))` on `[0, 1]`.
    Arcsine,
}

impl InvariantMeasure {
    pub const NAMES: [&'static str; 3] = ["lebesgue", "gauss", "arcsine"];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "lebesgue" => Some(InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 }),
            "gauss" => Some(InvariantMeasure::Gauss),
            "arcsine" => Some(InvariantMeasure::Arcsine),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InvariantMeasure::Lebesgue { .. } => "lebesgue",
            InvariantMeasure::Gauss => "gauss",
            InvariantMeasure::Arcsine => "arcsine",
        }
    }

    pub fn support(&self) -> Interval {
        match *self {
            InvariantMeasure::Lebesgue { lo, hi } => Interval::closed(lo, hi),
            _ => Interval::closed(0.0, 1.0),
        }
    }

    pub fn is_unit_lebesgue(&self) -> bool {
        *self == InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 }
    }

    pub fn density(&self, x: f64) -> f64 {
        if !self.support().contains(x) {
            return 0.0;
        }
        match *self {
            InvariantMeasure::Lebesgue { lo, hi } => 1.0 / (hi - lo),
            InvariantMeasure::Gauss => 1.0 / ((1.0 + x) * LN_2),
            InvariantMeasure::Arcsine => 1.0 / (PI * (x * (1.0 - x)).sqrt()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.support();
        let x = x.clamp(s.lo(), s.hi());
        match *self {
            InvariantMeasure::Lebesgue { lo, hi } => (x - lo) / (hi - lo),
            InvariantMeasure::Gauss => x.ln_1p() / LN_2,
            InvariantMeasure::Arcsine => FRAC_2_PI * x.sqrt().asin(),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            InvariantMeasure::Lebesgue { lo, hi } => lo + u * (hi - lo),
            InvariantMeasure::Gauss => (u * LN_2).exp_m1(),
            InvariantMeasure::Arcsine => {
                let s = (0.5 * PI * u).sin();
                s * s
            }
        }
    }

    /// Mass of one interval, computed without cancellation for short intervals.
    pub fn measure_interval(&self, i: &Interval) -> f64 {
        let c = i.intersect(&self.support());
        if c.is_empty() {
            return 0.0;
        }
        let (a, b) = (c.lo(), c.hi());
        match *self {
            InvariantMeasure::Lebesgue { lo, hi } => (b - a) / (hi - lo),
            InvariantMeasure::Gauss => ((b - a) / (1.0 + a)).ln_1p() / LN_2,
            InvariantMeasure::Arcsine => {
                // asin√b − asin√a = asin(√b√(1−a) − √a√(1−b)) on [0, 1]
                let s = b.sqrt() * (1.0 - a).sqrt() - a.sqrt() * (1.0 - b).sqrt();
                FRAC_2_PI * s.clamp(0.0, 1.0).asin()
            }
        }
    }

    pub fn measure_of(&self, a: &IntervalUnion) -> f64 {
        neumaier(a.cells().iter().map(|c| self.measure_interval(c)))
    }

    /// Draws `count` i.i.d. points by inverse transform of counter-based uniforms.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        out.par_chunks_mut(SAMPLE_CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut rng = CounterRng::at(seed, streams::MEASURE_SAMPLE, (c * SAMPLE_CHUNK) as u64, 1);
            for x in chunk.iter_mut() {
                *x = self.quantile(rng.uniform());
            }
        });
        out
    }

    /// Shannon entropy `Σ φ(μ(P_i))` over resolved cells.
    ///
    /// The tail cell is covered by `tail_bound`: its own `entropy_bound` when
    /// known, otherwise `φ(min(m, 1/e))` for tail mass bound `m`, which bounds
    /// the contribution of a single cell of mass at most `m`.
    pub fn shannon_entropy(&self, p: &IntervalPartition) -> EntropyValue {
        let value = neumaier(p.cells().iter().map(|c| phi(self.measure_interval(&c.interval))));
        let tail_bound = p.tail().map_or(0.0, |t| {
            t.entropy_bound
                .unwrap_or_else(|| phi(t.measure_bound.min(std::f64::consts::E.recip())))
        });
        EntropyValue {
            value,
            tail_bound,
            cells: p.len(),
            log_base: LogBase::E,
        }
    }

    /// `|μ(T^{-1}A) − μ(A)|`, where the tail part of the preimage may take any
    /// value in its certified range.
    pub fn check_invariance(&self, map: &PiecewiseMonotoneMap, a: &IntervalUnion) -> f64 {
        let target = self.measure_of(a);
        let pre = map.preimage(a);
        let resolved = self.measure_of(&pre.resolved);
        let slack = pre.tail.map_or(0.0, |t| t.measure_bound);
        if target < resolved {
            resolved - target
        } else if target > resolved + slack {
            target - resolved - slack
        } else {
            0.0
        }
    }
}

/// `φ(x) = −x ln x` with `φ(0) = 0`.
pub fn phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Compensated summation.
pub fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

impl LogBase {
    /// Factor converting nats into this base.
    pub fn from_nats(&self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => 1.0 / LN_2,
        }
    }
}

/// An entropy with a certified truncation error: the exact entropy lies in
/// `[value − tail_bound, value + tail_bound]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    pub tail_bound: f64,
    pub cells: usize,
    pub log_base: LogBase,
}

impl EntropyValue {
    pub fn lower(&self) -> f64 {
        self.value - self.tail_bound
    }

    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }

    pub fn in_base(&self, base: LogBase) -> EntropyValue {
        let k = base.from_nats() / self.log_base.from_nats();
        EntropyValue {
            value: self.value * k,
            tail_bound: self.tail_bound * k,
            cells: self.cells,
            log_base: base,
        }
    }
}

/// Gauss measure of the monotony cell `[1/(n+1), 1/n)`: `log2((n+1)²/(n(n+2)))`.
pub fn gauss_cell_measure(n: u64) -> f64 {
    let n = n as f64;
    (1.0 / (n * (n + 2.0))).ln_1p() / LN_2
}

/// `Σ_{n=1}^{n_max} φ(μ_n)`, summed from the smallest term up.
pub fn gauss_monotony_partial_sum(n_max: u64) -> f64 {
    neumaier((1..=n_max).rev().map(|n| phi(gauss_cell_measure(n))))
}

/// Certified bound on `Σ_{n > n_max} φ(μ_n)`.
///
/// Uses `μ_n ≤ 1/(ln2 · n²) < 1/e` and monotonicity of `φ` on `[0, 1/e]`, so
/// each term is at most `f(n) = (ln ln 2 + 2 ln n)/(ln 2 · n²)`; `f` decreases
/// for `n ≥ 2`, so the sum is at most `∫_{n_max}^∞ f`, which equals
/// `(ln ln 2 + 2 + 2 ln n_max)/(ln 2 · n_max)`.
pub fn gauss_tail_entropy_bound(n_max: u32) -> f64 {
    let integral = |n: f64| (LN_2.ln() + 2.0 + 2.0 * n.ln()) / (LN_2 * n);
    if n_max >= 2 {
        integral(f64::from(n_max))
    } else {
        // f is not yet decreasing on [1, 2]; bound the n = 2 term on its own
        let f2 = (LN_2.ln() + 2.0 * 2f64.ln()) / (LN_2 * 4.0);
        f2 + integral(2.0)
    }
}

/// Midpoint-rule estimate `∫_{n_max+1/2}^∞ φ(μ(x)) dx` of the tail sum.
pub fn gauss_tail_entropy_estimate(n_max: u64) -> f64 {
    let m = n_max as f64 + 0.5;
    let mu = |x: f64| (1.0 / (x * (x + 2.0))).ln_1p() / LN_2;
    // x = m/t maps [m, ∞) onto (0, 1]
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x = m / t;
        phi(mu(x)) * m / (t * t)
    };
    let scale = (2.0 * m.ln() + 2.0) / m;
    quadrature::integrate(g, 0.0, 1.0, 1e-14 * scale).integral
}

/// `H(M)` for the Gauss monotony partition with `n_max` resolved cells.
///
/// `value` is the partial sum plus the midpoint estimate of the tail;
/// `tail_bound` is wide enough that `value ± tail_bound` contains the
/// certified enclosure `[S_N, S_N + B(N)]`. The null cell `{0}` contributes
/// nothing.
pub fn gauss_monotony_entropy(n_max: u32) -> EntropyValue {
    let partial = gauss_monotony_partial_sum(u64::from(n_max));
    let estimate = gauss_tail_entropy_estimate(u64::from(n_max));
    let bound = gauss_tail_entropy_bound(n_max);
    EntropyValue {
        value: partial + estimate,
        tail_bound: estimate.max(bound - estimate),
        cells: n_max as usize,
        log_base: LogBase::E,
    }
}
