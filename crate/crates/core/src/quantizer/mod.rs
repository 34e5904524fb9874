//! Weighted vector quantizers: competitive learning (CLVQ), mini-batch
//! k-means, Lloyd iterations and the weights attached to their grids.

mod clvq;
mod init;
mod kmeans;
mod lloyd;

pub use clvq::{clvq, clvq_from_grid, empirical_distortion_trace, Clvq, ClvqRun};
pub use init::{extend_grid_farthest, init_grid, init_grid_from_sampler, InitStrategy};
pub use kmeans::{minibatch_kmeans, MiniBatchKMeans};
pub use lloyd::{lloyd, lloyd_restarts, LloydConfig, LloydResult};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, QuantizationGrid};
use crate::scalar::Real;

/// Step sizes of the stochastic quantizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule<T> {
    /// `gamma_i = a / (b + i)` for the 1-based step counter `i`.
    Harmonic { a: T, b: T },
    /// `gamma = 1 / v_k`, the reciprocal of the winner's update count.
    CountReciprocal,
}

impl<T: Real> Default for StepSchedule<T> {
    fn default() -> Self {
        Self::Harmonic {
            a: T::one(),
            b: T::of(10.0),
        }
    }
}

impl<T: Real> StepSchedule<T> {
    /// Checks that every step the schedule can emit lies in `(0, 1]`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Harmonic { a, b } => {
                let first = a / (b + T::one());
                if !(a > T::zero()) || !(b > T::zero()) || !(first <= T::one()) {
                    return Err(Error::InvalidSchedule {
                        step: 1,
                        gamma: first.as_f64(),
                    });
                }
                Ok(())
            }
            Self::CountReciprocal => Ok(()),
        }
    }

    /// Step for the 1-based iteration `step`, given the winner's update
    /// count after incrementing it.
    #[inline]
    pub fn gamma(&self, step: usize, winner_count: T) -> T {
        match *self {
            Self::Harmonic { a, b } => a / (b + T::of_usize(step)),
            Self::CountReciprocal => T::one() / winner_count,
        }
    }
}

/// A grid with per-centroid update tallies and companion weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuantization<T> {
    pub grid: QuantizationGrid<T>,
    pub counts: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> WeightedQuantization<T> {
    /// `sum_k w_k delta(x_k)`.
    pub fn measure(&self) -> Result<DiscreteMeasure<T>> {
        self.grid.measure_with(self.weights.clone())
    }

    pub fn variance_reduced_weights(&self) -> Result<Vec<T>> {
        variance_reduced_weights(&self.counts)
    }
}

/// Counts normalized to unit mass.
pub fn normalized_counts<T: Real>(counts: &[T]) -> Result<Vec<T>> {
    let total: T = counts.iter().copied().sum();
    if counts.iter().any(|c| *c < T::zero() || !c.is_finite()) || !(total > T::zero()) {
        return Err(Error::InvalidSpec("counts must be nonnegative with positive sum".into()));
    }
    Ok(counts.iter().map(|&c| c / total).collect())
}

/// `w_k = sqrt(K) * sqrt(v_k / sum_j v_j)`.
///
/// Not renormalized: equal counts give all-ones. A zero count is reported
/// as [`Error::EmptyCluster`].
pub fn variance_reduced_weights<T: Real>(counts: &[T]) -> Result<Vec<T>> {
    let p = normalized_counts(counts)?;
    if let Some(index) = counts.iter().position(|c| *c == T::zero()) {
        return Err(Error::EmptyCluster { index });
    }
    let scale = T::of_usize(counts.len()).sqrt();
    Ok(p.into_iter().map(|q| scale * q.sqrt()).collect())
}
