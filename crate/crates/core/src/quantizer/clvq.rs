use rand::Rng;

use super::init::{init_grid_from_sampler, InitStrategy};
use super::{StepSchedule, WeightedQuantization};
use crate::error::{check_dim, Error, Result};
use crate::measure::{nearest, QuantizationGrid};
use crate::sampler::Sampler;
use crate::scalar::Real;
use crate::seed;

/// Competitive learning vector quantizer with companion weights.
///
/// Each step compares the sample against the pre-update grid, moves only
/// the winner by a convex combination and mixes an indicator into the
/// weights, so weights stay on the simplex and centroids stay in the hull
/// of the initial grid and the samples.
#[derive(Debug, Clone)]
pub struct Clvq<T> {
    grid: QuantizationGrid<T>,
    weights: Vec<T>,
    counts: Vec<T>,
    schedule: StepSchedule<T>,
    step: usize,
    winner_sq_dist: Vec<T>,
}

impl<T: Real> Clvq<T> {
    /// Starts from `grid` with uniform weights `1/K` and zero counts.
    pub fn new(grid: QuantizationGrid<T>, schedule: StepSchedule<T>) -> Result<Self> {
        schedule.validate()?;
        let k = grid.k();
        Ok(Self {
            grid,
            weights: vec![T::one() / T::of_usize(k); k],
            counts: vec![T::zero(); k],
            schedule,
            step: 0,
            winner_sq_dist: Vec::new(),
        })
    }

    /// Processes one sample and returns the winner index.
    pub fn step(&mut self, x: &[T]) -> Result<usize> {
        check_dim(self.grid.dim(), x.len())?;
        self.step += 1;
        let (win, d2) = nearest(x, &self.grid);
        self.winner_sq_dist.push(d2);
        self.counts[win] += T::one();
        let gamma = self.schedule.gamma(self.step, self.counts[win]);
        if !(gamma > T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidSchedule {
                step: self.step,
                gamma: gamma.as_f64(),
            });
        }
        for (c, &s) in self.grid.centroid_mut(win).iter_mut().zip(x) {
            *c += gamma * (s - *c);
        }
        for (k, w) in self.weights.iter_mut().enumerate() {
            let hit = if k == win { T::one() } else { T::zero() };
            *w += gamma * (hit - *w);
        }
        Ok(win)
    }

    pub fn grid(&self) -> &QuantizationGrid<T> {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn counts(&self) -> &[T] {
        &self.counts
    }

    /// Ends the run. Weights are rescaled by their sum to remove the
    /// rounding drift accumulated over long runs.
    pub fn finish(mut self) -> ClvqRun<T> {
        let total: T = self.weights.iter().copied().sum();
        for w in &mut self.weights {
            *w /= total;
        }
        ClvqRun {
            quantization: WeightedQuantization {
                grid: self.grid,
                counts: self.counts,
                weights: self.weights,
            },
            winner_sq_dist: self.winner_sq_dist,
        }
    }
}

/// Result of a CLVQ run together with the per-step squared distance of
/// each sample to the grid it was compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct ClvqRun<T> {
    pub quantization: WeightedQuantization<T>,
    pub winner_sq_dist: Vec<T>,
}

/// Running averages `(1/t) sum_{s<=t} min_i |X_s - x_i^(s)|^2`.
pub fn empirical_distortion_trace<T: Real>(run: &ClvqRun<T>) -> Vec<T> {
    let mut acc = T::zero();
    run.winner_sq_dist
        .iter()
        .enumerate()
        .map(|(t, &d)| {
            acc += d;
            acc / T::of_usize(t + 1)
        })
        .collect()
}

/// Runs `n_steps` CLVQ steps from `grid` on draws from `sampler`.
pub fn clvq_from_grid<T: Real, R: Rng + ?Sized>(
    sampler: &Sampler<T>,
    grid: QuantizationGrid<T>,
    schedule: StepSchedule<T>,
    n_steps: usize,
    rng: &mut R,
) -> Result<ClvqRun<T>> {
    check_dim(grid.dim(), sampler.dim())?;
    if n_steps == 0 {
        return Err(Error::InvalidSpec("CLVQ needs at least one step".into()));
    }
    let mut q = Clvq::new(grid, schedule)?;
    q.winner_sq_dist.reserve(n_steps);
    let mut x = vec![T::zero(); sampler.dim()];
    for _ in 0..n_steps {
        sampler.draw_into(rng, &mut x);
        q.step(&x)?;
    }
    Ok(q.finish())
}

/// CLVQ from a D^2-seeded grid. The grid is seeded from stream 0 of
/// `seed` and samples come from stream 1.
pub fn clvq<T: Real>(
    sampler: &Sampler<T>,
    k: usize,
    schedule: StepSchedule<T>,
    n_steps: usize,
    seed: u64,
) -> Result<ClvqRun<T>> {
    let grid = init_grid_from_sampler(sampler, k, InitStrategy::DSquared, &mut seed::stream(seed, 0))?;
    clvq_from_grid(sampler, grid, schedule, n_steps, &mut seed::stream(seed, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{quadratic_distortion, DiscreteMeasure, Point};
    use crate::seed::stream;
    use proptest::prelude::*;

    #[test]
    fn single_step_example() {
        let grid = QuantizationGrid::from_flat(1, vec![0.0, 1.0]).unwrap();
        // gamma_1 = 1 / (1 + 1)
        let mut q = Clvq::new(grid, StepSchedule::Harmonic { a: 1.0, b: 1.0 }).unwrap();
        q.step(&[0.2]).unwrap();
        assert_eq!(q.grid().flat(), &[0.1, 1.0]);
        assert_eq!(q.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn single_cell_tracks_the_mean() {
        let s = Sampler::<f64>::gaussian_mixture(
            vec![Point::new(vec![2.0, -1.0]).unwrap()],
            vec![vec![1.0, 4.0]],
            vec![1.0],
        )
        .unwrap();
        let n = 100_000;
        let run = clvq(&s, 1, StepSchedule::default(), n, 17).unwrap();
        let c = run.quantization.grid.centroid(0);
        let se = [1.0 / (n as f64).sqrt(), 2.0 / (n as f64).sqrt()];
        assert!((c[0] - 2.0).abs() < 5.0 * se[0], "{c:?}");
        assert!((c[1] + 1.0).abs() < 5.0 * se[1], "{c:?}");
        assert_eq!(run.quantization.weights, vec![1.0]);
    }

    #[test]
    fn constant_sampler_has_zero_trace() {
        let s = Sampler::empirical(DiscreteMeasure::dirac(Point::new(vec![3.0]).unwrap())).unwrap();
        let run = clvq(&s, 1, StepSchedule::default(), 50, 0).unwrap();
        let trace = empirical_distortion_trace(&run);
        assert_eq!(trace.len(), 50);
        assert!(trace.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn mixture_weights_and_trace() {
        let s = Sampler::<f64>::gaussian_mixture(
            vec![Point::new(vec![-3.0]).unwrap(), Point::new(vec![3.0]).unwrap()],
            vec![vec![0.01], vec![0.01]],
            vec![0.7, 0.3],
        )
        .unwrap();
        let run = clvq(&s, 2, StepSchedule::default(), 100_000, 3).unwrap();
        let q = &run.quantization;
        let left = if q.grid.centroid(0)[0] < 0.0 { 0 } else { 1 };
        assert!((q.weights[left] - 0.7).abs() < 0.02, "{:?}", q.weights);
        let trace = empirical_distortion_trace(&run);
        assert_eq!(trace.len(), 100_000);
        let fresh = s.sample_measure(100_000, &mut stream(99, 0)).unwrap();
        let g = quadratic_distortion(&fresh, &q.grid).unwrap();
        let last = *trace.last().unwrap();
        assert!((last - g).abs() <= 0.1 * g, "{last} vs {g}");
    }

    #[test]
    fn bad_schedule_is_rejected() {
        let s = Sampler::<f64>::uniform_cube(1).unwrap();
        assert!(matches!(
            clvq(&s, 1, StepSchedule::Harmonic { a: 3.0, b: 1.0 }, 10, 0),
            Err(Error::InvalidSchedule { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn weights_on_simplex_and_centroids_in_hull(seed in any::<u64>(), k in 1usize..5) {
            let s = Sampler::<f64>::uniform_cube(2).unwrap();
            let grid = crate::quantizer::init_grid_from_sampler(&s, k, InitStrategy::RandomSubset, &mut stream(seed, 0)).unwrap();
            let mut q = Clvq::new(grid, StepSchedule::default()).unwrap();
            let mut rng = stream(seed, 1);
            for _ in 0..300 {
                let x = s.draw(&mut rng);
                q.step(&x).unwrap();
                let total: f64 = q.weights().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(q.weights().iter().all(|w| (0.0..=1.0).contains(w)));
                // init atoms and samples all live in [0,1]^2, a convex set
                prop_assert!(q.grid().flat().iter().all(|c| (0.0..=1.0).contains(c)));
            }
        }
    }
}
