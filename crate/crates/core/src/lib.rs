//! Entropy tools for piecewise monotone interval maps.
//!
//! The crate computes and estimates Kolmogorov-Sinai and permutation entropy
//! for one-dimensional maps, and checks the finite combinatorial facts that
//! connect them: the compatible-pattern count bound, its per-lag
//! factorization, Rokhlin towers with interval bases, and finiteness of the
//! Gauss map's monotony-partition entropy.
//!
//! Modules, bottom-up:
//!
//! * [`interval`]: intervals, interval unions, interval partitions with a tail.
//! * [`maps`]: monotone branches, builtin maps, preimages, cylinders.
//! * [`measures`]: invariant measures, partition entropy, sampling.
//! * [`ordinal`]: ordinal patterns, comparison matrices, Lehmer ranks.
//! * [`estimators`]: pattern histograms, entropy estimates, the quadrature oracle.
//! * [`compat`]: exact compatible-pattern sets per cylinder.
//! * [`rokhlin`]: tower bases, the Q-partition, and the visit bound.

pub mod compat;
pub mod estimators;
pub mod interval;
pub mod maps;
pub mod measures;
pub mod ordinal;
pub mod rng;
pub mod rokhlin;

pub use interval::{Cell, Interval, IntervalPartition, IntervalUnion, Label, TailCell};
pub use maps::{Builtin, PiecewiseMonotoneMap};
pub use measures::{EntropyValue, InvariantMeasure};
pub use ordinal::{ComparisonMatrix, OrdinalPattern};

use thiserror::Error;

/// Union of the per-module error types, for callers that mix modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Interval(#[from] interval::IntervalError),
    #[error(transparent)]
    Map(#[from] maps::MapError),
    #[error(transparent)]
    Ordinal(#[from] ordinal::OrdinalError),
    #[error(transparent)]
    Estimator(#[from] estimators::EstimatorError),
    #[error(transparent)]
    Compat(#[from] compat::CompatError),
    #[error(transparent)]
    Rokhlin(#[from] rokhlin::RokhlinError),
}

impl Error {
    /// True for errors caused by exceeding a cell or word budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::Estimator(estimators::EstimatorError::CellExplosion { .. })
                | Error::Compat(compat::CompatError::BudgetExceeded { .. })
                | Error::Rokhlin(rokhlin::RokhlinError::CellExplosion { .. })
                | Error::Rokhlin(rokhlin::RokhlinError::BudgetExceeded { .. })
        )
    }
}
