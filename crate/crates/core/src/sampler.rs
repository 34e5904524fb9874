//! Seeded i.i.d. samplers for the laws the quantizers are run against.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::measure::{DiscreteMeasure, Point};
use crate::scalar::Real;

#[derive(Debug, Clone)]
enum Law<T> {
    Empirical {
        measure: DiscreteMeasure<T>,
        index: WeightedIndex<f64>,
    },
    GaussianMixture {
        means: Vec<Point<T>>,
        stds: Vec<Vec<T>>,
        weights: Vec<T>,
        index: WeightedIndex<f64>,
    },
    UniformCube,
}

/// Source of i.i.d. draws from a law with finite second moment.
#[derive(Debug, Clone)]
pub struct Sampler<T> {
    dim: usize,
    law: Law<T>,
}

fn weighted_index<T: Real>(weights: &[T]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights.iter().map(|w| w.as_f64()))
        .map_err(|e| Error::InvalidMeasure(format!("cannot sample weights: {e}")))
}

impl<T: Real> Sampler<T> {
    /// Draws atoms of `measure` with probability equal to their weights.
    pub fn empirical(measure: DiscreteMeasure<T>) -> Result<Self> {
        let index = weighted_index(measure.weights())?;
        Ok(Self {
            dim: measure.dim(),
            law: Law::Empirical { measure, index },
        })
    }

    /// Mixture of axis-aligned Gaussians; `variances[k]` is the diagonal of
    /// component `k`'s covariance.
    pub fn gaussian_mixture(means: Vec<Point<T>>, variances: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if means.is_empty() || means.len() != variances.len() || means.len() != weights.len() {
            return Err(Error::InvalidSpec("mixture needs matching non-empty means, variances and weights".into()));
        }
        let dim = means[0].dim();
        for (m, v) in means.iter().zip(&variances) {
            check_dim(dim, m.dim())?;
            check_dim(dim, v.len())?;
            if v.iter().any(|s| !(*s >= T::zero()) || !s.is_finite()) {
                return Err(Error::InvalidSpec("variances must be finite and nonnegative".into()));
            }
        }
        let index = weighted_index(&weights)?;
        let stds = variances.into_iter().map(|v| v.into_iter().map(T::sqrt).collect()).collect();
        Ok(Self {
            dim,
            law: Law::GaussianMixture {
                means,
                stds,
                weights,
                index,
            },
        })
    }

    /// Uniform law on `[0, 1]^dim`.
    pub fn uniform_cube(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            law: Law::UniformCube,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The underlying measure when the law is empirical.
    pub fn as_empirical(&self) -> Option<&DiscreteMeasure<T>> {
        match &self.law {
            Law::Empirical { measure, .. } => Some(measure),
            _ => None,
        }
    }

    /// Writes one draw into `out` (length `dim`).
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.law {
            Law::Empirical { measure, index } => {
                out.copy_from_slice(measure.atom(index.sample(rng)));
            }
            Law::GaussianMixture { means, stds, index, .. } => {
                let k = index.sample(rng);
                for ((o, &m), &s) in out.iter_mut().zip(means[k].as_slice()).zip(&stds[k]) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = m + s * T::of(z);
                }
            }
            Law::UniformCube => {
                for o in out.iter_mut() {
                    *o = T::of(rng.random::<f64>());
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.draw_into(rng, &mut out);
        out
    }

    /// `n` i.i.d. draws as a uniform-weight empirical measure.
    pub fn sample_measure<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DiscreteMeasure<T>> {
        let mut coords = vec![T::zero(); n * self.dim];
        for row in coords.chunks_exact_mut(self.dim) {
            self.draw_into(rng, row);
        }
        DiscreteMeasure::uniform_flat(self.dim, coords)
    }

    /// Mean of the law.
    pub fn mean(&self) -> Point<T> {
        match &self.law {
            Law::Empirical { measure, .. } => measure.mean(),
            Law::GaussianMixture { means, weights, .. } => {
                let total: T = weights.iter().copied().sum();
                let mut m = vec![T::zero(); self.dim];
                for (mu, &w) in means.iter().zip(weights) {
                    for (a, &b) in m.iter_mut().zip(mu.as_slice()) {
                        *a += w / total * b;
                    }
                }
                Point::from_vec_unchecked(m)
            }
            Law::UniformCube => Point::from_vec_unchecked(vec![T::of(0.5); self.dim]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;

    #[test]
    fn draws_are_reproducible() {
        let s = Sampler::<f64>::uniform_cube(3).unwrap();
        assert_eq!(s.draw(&mut stream(9, 0)), s.draw(&mut stream(9, 0)));
    }

    #[test]
    fn mixture_moments() {
        let s = Sampler::<f64>::gaussian_mixture(
            vec![Point::new(vec![-3.0]).unwrap(), Point::new(vec![3.0]).unwrap()],
            vec![vec![0.01], vec![0.01]],
            vec![0.7, 0.3],
        )
        .unwrap();
        let mut rng = stream(1, 0);
        let n = 20_000;
        let left = (0..n).filter(|_| s.draw(&mut rng)[0] < 0.0).count() as f64 / n as f64;
        assert!((left - 0.7).abs() < 0.02);
        assert!((s.mean().as_slice()[0] - (-1.2)).abs() < 1e-12);
    }

    #[test]
    fn empirical_respects_weights() {
        let mu = DiscreteMeasure::from_flat(1, vec![0.0, 1.0], vec![0.9, 0.1]).unwrap();
        let s = Sampler::empirical(mu).unwrap();
        let mut rng = stream(2, 0);
        let ones = (0..10_000).filter(|_| s.draw(&mut rng)[0] == 1.0).count();
        assert!((ones as f64 / 10_000.0 - 0.1).abs() < 0.015);
    }
}
