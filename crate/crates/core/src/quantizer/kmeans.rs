use super::init::{init_grid, InitStrategy};
use super::{normalized_counts, WeightedQuantization};
use crate::error::{check_dim, Error, Result};
use crate::measure::{nearest, DiscreteMeasure, QuantizationGrid};
use crate::sampler::Sampler;
use crate::scalar::Real;
use crate::seed;

/// Online mini-batch k-means: every presented point moves its nearest
/// centroid with learning rate `1 / v`, `v` being that centroid's update
/// count. Counts start at zero.
#[derive(Debug, Clone)]
pub struct MiniBatchKMeans<T> {
    grid: QuantizationGrid<T>,
    counts: Vec<T>,
}

impl<T: Real> MiniBatchKMeans<T> {
    pub fn new(grid: QuantizationGrid<T>) -> Self {
        let k = grid.k();
        Self {
            grid,
            counts: vec![T::zero(); k],
        }
    }

    pub fn absorb(&mut self, z: &[T]) -> Result<usize> {
        check_dim(self.grid.dim(), z.len())?;
        let (k, _) = nearest(z, &self.grid);
        self.counts[k] += T::one();
        let eta = T::one() / self.counts[k];
        for (c, &x) in self.grid.centroid_mut(k).iter_mut().zip(z) {
            *c += eta * (x - *c);
        }
        Ok(k)
    }

    pub fn absorb_batch<'a>(&mut self, batch: impl IntoIterator<Item = &'a [T]>) -> Result<()> {
        for z in batch {
            self.absorb(z)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> &QuantizationGrid<T> {
        &self.grid
    }

    pub fn counts(&self) -> &[T] {
        &self.counts
    }

    /// Grid, counts and weights `v_k / sum_j v_j`.
    pub fn finish(self) -> Result<WeightedQuantization<T>> {
        let weights = normalized_counts(&self.counts)?;
        Ok(WeightedQuantization {
            grid: self.grid,
            counts: self.counts,
            weights,
        })
    }
}

/// Mini-batch k-means on `data`: D^2 seeding from stream 0 of `seed`, then
/// `n_iters` batches of `batch_size` i.i.d. draws from stream 1.
pub fn minibatch_kmeans<T: Real>(
    data: &DiscreteMeasure<T>,
    k: usize,
    batch_size: usize,
    n_iters: usize,
    seed: u64,
) -> Result<WeightedQuantization<T>> {
    if batch_size == 0 || n_iters == 0 {
        return Err(Error::InvalidSpec("batch size and iteration count must be positive".into()));
    }
    let grid = init_grid(data, k, InitStrategy::DSquared, &mut seed::stream(seed, 0))?;
    let sampler = Sampler::empirical(data.clone())?;
    let mut rng = seed::stream(seed, 1);
    let mut km = MiniBatchKMeans::new(grid);
    let mut batch = vec![T::zero(); batch_size * data.dim()];
    for _ in 0..n_iters {
        for row in batch.chunks_exact_mut(data.dim()) {
            sampler.draw_into(&mut rng, row);
        }
        km.absorb_batch(batch.chunks_exact(data.dim()))?;
    }
    km.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{clvq, StepSchedule};

    #[test]
    fn centers_on_atoms_stay_fixed() {
        let atoms = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let grid = QuantizationGrid::from_flat(2, atoms.clone()).unwrap();
        let mut km = MiniBatchKMeans::new(grid);
        km.absorb_batch(atoms.chunks_exact(2)).unwrap();
        assert_eq!(km.grid().flat(), atoms.as_slice());
        assert_eq!(km.counts(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_cluster_recovers_the_mean() {
        let xs = [3.0, -1.0, 4.0, 1.5, 9.0, 2.5];
        let mut km = MiniBatchKMeans::new(QuantizationGrid::from_flat(1, vec![100.0]).unwrap());
        km.absorb_batch(xs.chunks_exact(1)).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((km.grid().flat()[0] - mean).abs() < 1e-14);
    }

    #[test]
    fn skewed_two_point_weights() {
        let mut coords = vec![0.0f64; 90];
        coords.extend(vec![5.0; 10]);
        let data = DiscreteMeasure::uniform_flat(1, coords).unwrap();
        let q = minibatch_kmeans(&data, 2, 100, 50, 4).unwrap();
        let a = if q.grid.centroid(0)[0] == 0.0 { 0 } else { 1 };
        assert!((q.weights[a] - 0.9).abs() < 0.03, "{:?}", q.weights);
        assert_eq!(q.counts.iter().sum::<f64>(), 5000.0);
    }

    #[test]
    fn insufficient_points() {
        let data = DiscreteMeasure::uniform_flat(1, vec![1.0; 10]).unwrap();
        assert!(matches!(
            minibatch_kmeans(&data, 2, 10, 1, 0),
            Err(Error::InsufficientPoints { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn equivalent_to_count_reciprocal_clvq() {
        let coords: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
        let data = DiscreteMeasure::uniform_flat(2, coords).unwrap();
        let km = minibatch_kmeans(&data, 5, 32, 40, 8).unwrap();
        let sampler = Sampler::empirical(data).unwrap();
        let run = clvq(&sampler, 5, StepSchedule::CountReciprocal, 32 * 40, 8).unwrap();
        assert_eq!(km.grid.flat(), run.quantization.grid.flat());
        assert_eq!(km.counts, run.quantization.counts);
    }
}
