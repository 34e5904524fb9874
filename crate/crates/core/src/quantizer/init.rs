use rand::seq::index;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::measure::{distinct_rows, nearest, DiscreteMeasure, QuantizationGrid};
use crate::sampler::Sampler;
use crate::scalar::{sq_dist, Real};

/// How initial centroids are picked from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// k-means++ style seeding, proportional to weight times squared
    /// distance to the already chosen centroids.
    #[default]
    DSquared,
    /// `K` distinct atoms chosen uniformly without replacement.
    RandomSubset,
}

/// Picks `k` pairwise-distinct atoms of `data` as initial centroids.
///
/// Centroids are data atoms, so they lie in the convex hull of the support.
pub fn init_grid<T: Real, R: Rng + ?Sized>(
    data: &DiscreteMeasure<T>,
    k: usize,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<QuantizationGrid<T>> {
    let dim = data.dim();
    let found = data.distinct_support_len();
    if k == 0 || found < k {
        return Err(Error::InsufficientPoints { needed: k.max(1), found });
    }
    let flat = match strategy {
        InitStrategy::RandomSubset => {
            let rows = distinct_rows(
                dim,
                data.atoms().zip(data.weights()).filter(|(_, w)| **w > T::zero()).map(|(a, _)| a),
            );
            let mut flat = Vec::with_capacity(k * dim);
            for i in index::sample(rng, rows.len(), k) {
                flat.extend_from_slice(&rows[i]);
            }
            flat
        }
        InitStrategy::DSquared => dsquared(data, k, rng)?,
    };
    Ok(QuantizationGrid::from_flat_unchecked(dim, flat))
}

fn pick<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 {
            acc += s;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

fn dsquared<T: Real, R: Rng + ?Sized>(data: &DiscreteMeasure<T>, k: usize, rng: &mut R) -> Result<Vec<T>> {
    let weights: Vec<f64> = data.weights().iter().map(|w| w.as_f64()).collect();
    let first = pick(&weights, rng).ok_or(Error::InsufficientPoints { needed: k, found: 0 })?;
    let mut flat = data.atom(first).to_vec();
    let mut d2: Vec<f64> = data.atoms().map(|a| sq_dist(a, data.atom(first)).as_f64()).collect();
    for chosen in 1..k {
        let scores: Vec<f64> = d2.iter().zip(&weights).map(|(d, w)| d * w).collect();
        let next = pick(&scores, rng).ok_or(Error::InsufficientPoints { needed: k, found: chosen })?;
        let c = data.atom(next).to_vec();
        for (d, a) in d2.iter_mut().zip(data.atoms()) {
            *d = d.min(sq_dist(a, &c).as_f64());
        }
        flat.extend(c);
    }
    Ok(flat)
}

/// Initial grid for a sampler: empirical laws are seeded directly from
/// their atoms, other laws from a pool of `max(64 k, 1024)` draws.
pub fn init_grid_from_sampler<T: Real, R: Rng + ?Sized>(
    sampler: &Sampler<T>,
    k: usize,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<QuantizationGrid<T>> {
    match sampler.as_empirical() {
        Some(measure) => init_grid(measure, k, strategy, rng),
        None => {
            let pool = sampler.sample_measure((64 * k).max(1024), rng)?;
            init_grid(&pool, k, strategy, rng)
        }
    }
}

/// Appends centroids at the positive-weight atom farthest from the current
/// grid until it has `k` centroids. Distortion decreases strictly with each
/// addition while it is positive.
pub fn extend_grid_farthest<T: Real>(
    data: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
    k: usize,
) -> Result<QuantizationGrid<T>> {
    check_dim(grid.dim(), data.dim())?;
    let mut g = grid.clone();
    while g.k() < k {
        let mut best: Option<(usize, T)> = None;
        for (i, a) in data.atoms().enumerate() {
            if data.weight(i) == T::zero() {
                continue;
            }
            let d = nearest(a, &g).1;
            if d > T::zero() && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.ok_or(Error::InsufficientPoints {
            needed: k,
            found: g.k(),
        })?;
        g = g.with_appended(data.atom(i))?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::quadratic_distortion;
    use crate::seed::stream;

    #[test]
    fn forced_choice_and_insufficient_points() {
        let mu = DiscreteMeasure::uniform_flat(1, vec![0.0, 1.0, 2.0]).unwrap();
        for strategy in [InitStrategy::DSquared, InitStrategy::RandomSubset] {
            let g = init_grid(&mu, 3, strategy, &mut stream(1, 0)).unwrap();
            let mut xs = g.flat().to_vec();
            xs.sort_by(f64::total_cmp);
            assert_eq!(xs, vec![0.0, 1.0, 2.0]);
            assert_eq!(
                init_grid(&mu, 4, strategy, &mut stream(1, 0)),
                Err(Error::InsufficientPoints { needed: 4, found: 3 })
            );
        }
    }

    #[test]
    fn duplicates_do_not_count_as_distinct() {
        let mu = DiscreteMeasure::uniform_flat(1, vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            init_grid(&mu, 3, InitStrategy::DSquared, &mut stream(1, 0)),
            Err(Error::InsufficientPoints { found: 2, .. })
        ));
        let g = init_grid(&mu, 2, InitStrategy::DSquared, &mut stream(1, 0)).unwrap();
        assert_eq!(g.k(), 2);
        assert!(QuantizationGrid::from_flat(1, g.flat().to_vec()).is_ok());
    }

    #[test]
    fn dsquared_separates_two_clusters() {
        let mut rng = stream(42, 9);
        let mut coords = Vec::new();
        for c in [-10.0, 10.0] {
            for _ in 0..50 {
                coords.push(c + rng.random_range(-0.5..0.5));
                coords.push(rng.random_range(-0.5..0.5));
            }
        }
        let mu = DiscreteMeasure::uniform_flat(2, coords).unwrap();
        let hits = (0..200u64)
            .filter(|&s| {
                let g = init_grid(&mu, 2, InitStrategy::DSquared, &mut stream(s, 0)).unwrap();
                (g.centroid(0)[0] < 0.0) != (g.centroid(1)[0] < 0.0)
            })
            .count();
        assert!(hits as f64 / 200.0 >= 0.95, "{hits}");
    }

    #[test]
    fn farthest_extension_strictly_reduces_distortion() {
        let mu = DiscreteMeasure::uniform_flat(1, (0..20).map(|i| i as f64).collect()).unwrap();
        let g = QuantizationGrid::from_flat(1, vec![3.0]).unwrap();
        let g4 = extend_grid_farthest(&mu, &g, 4).unwrap();
        assert_eq!(g4.k(), 4);
        assert_eq!(g4.centroid(1), &[19.0]);
        let mut prev = quadratic_distortion(&mu, &g).unwrap();
        for k in 2..=4 {
            let gk = extend_grid_farthest(&mu, &g, k).unwrap();
            let dk = quadratic_distortion(&mu, &gk).unwrap();
            assert!(dk < prev);
            prev = dk;
        }
    }
}
