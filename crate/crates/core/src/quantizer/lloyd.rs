use super::init::{init_grid, InitStrategy};
use crate::error::{check_dim, Error, Result};
use crate::measure::{nearest, DiscreteMeasure, QuantizationGrid};
use crate::scalar::{sq_dist, Real};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydConfig<T> {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: T,
}

impl<T: Real> Default for LloydConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: T::of(1e-10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult<T> {
    pub grid: QuantizationGrid<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of empty cells that were reseeded.
    pub reseeded: usize,
    /// Distortion of the initial grid followed by that of every iterate.
    pub distortions: Vec<T>,
}

impl<T: Real> LloydResult<T> {
    pub fn distortion(&self) -> T {
        *self.distortions.last().expect("history holds the initial grid")
    }

    pub fn empty_cell_resolved(&self) -> bool {
        self.reseeded > 0
    }
}

struct Sweep<T> {
    assignment: Vec<usize>,
    mass: Vec<T>,
    sums: Vec<T>,
    distortion: T,
}

fn sweep<T: Real>(mu: &DiscreteMeasure<T>, grid: &QuantizationGrid<T>) -> Sweep<T> {
    let d = grid.dim();
    let mut s = Sweep {
        assignment: Vec::with_capacity(mu.len()),
        mass: vec![T::zero(); grid.k()],
        sums: vec![T::zero(); grid.k() * d],
        distortion: T::zero(),
    };
    for (a, &w) in mu.atoms().zip(mu.weights()) {
        let (j, d2) = nearest(a, grid);
        s.assignment.push(j);
        s.mass[j] += w;
        s.distortion += w * d2;
        for (acc, &x) in s.sums[j * d..(j + 1) * d].iter_mut().zip(a) {
            *acc += w * x;
        }
    }
    s
}

/// Lloyd I: replace every centroid by the mu-centroid of its Voronoi cell
/// until the largest displacement is at most `tol` or `max_iter` is hit.
///
/// An empty cell is reseeded at the positive-weight atom farthest from the
/// updated centroid of its own cell; the distortion stays non-increasing.
pub fn lloyd<T: Real>(
    mu: &DiscreteMeasure<T>,
    grid0: &QuantizationGrid<T>,
    config: LloydConfig<T>,
) -> Result<LloydResult<T>> {
    check_dim(grid0.dim(), mu.dim())?;
    let d = grid0.dim();
    let k = grid0.k();
    let mut grid = grid0.clone();
    let mut reseeded = 0;
    let mut distortions = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let s = sweep(mu, &grid);
        distortions.push(s.distortion);
        let mut next = grid.flat().to_vec();
        let mut empty = Vec::new();
        for j in 0..k {
            if s.mass[j] > T::zero() {
                for (c, &acc) in next[j * d..(j + 1) * d].iter_mut().zip(&s.sums[j * d..(j + 1) * d]) {
                    *c = acc / s.mass[j];
                }
            } else {
                empty.push(j);
            }
        }
        if !empty.is_empty() {
            let mut far: Vec<T> = mu
                .atoms()
                .zip(&s.assignment)
                .enumerate()
                .map(|(i, (a, &j))| {
                    if mu.weight(i) > T::zero() {
                        sq_dist(a, &next[j * d..(j + 1) * d])
                    } else {
                        T::zero()
                    }
                })
                .collect();
            for &j in &empty {
                let (i, dmax) = far
                    .iter()
                    .enumerate()
                    .fold((0, T::zero()), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
                if dmax > T::zero() {
                    next[j * d..(j + 1) * d].copy_from_slice(mu.atom(i));
                    far[i] = T::zero();
                    reseeded += 1;
                }
            }
        }
        let shift = grid
            .centroids()
            .zip(next.chunks_exact(d))
            .map(|(a, b)| sq_dist(a, b))
            .fold(T::zero(), T::max)
            .sqrt();
        grid = QuantizationGrid::from_flat_unchecked(d, next);
        iterations += 1;
        if shift <= config.tol && empty.is_empty() {
            converged = true;
            break;
        }
    }
    distortions.push(sweep(mu, &grid).distortion);
    if !distortions.iter().all(|g| g.is_finite()) {
        return Err(Error::InvalidMeasure("distortion became non-finite".into()));
    }
    Ok(LloydResult {
        grid,
        iterations,
        converged,
        reseeded,
        distortions,
    })
}

/// Best of `restarts` Lloyd runs, restart `r` seeded by
/// `derive_seed(seed, r)`. Ties keep the earliest restart.
pub fn lloyd_restarts<T: Real>(
    mu: &DiscreteMeasure<T>,
    k: usize,
    strategy: InitStrategy,
    restarts: usize,
    seed: u64,
    config: LloydConfig<T>,
) -> Result<LloydResult<T>> {
    let mut best: Option<LloydResult<T>> = None;
    for r in 0..restarts.max(1) {
        let mut rng = seed::stream(seed::derive_seed(seed, r as u64), 0);
        let g0 = init_grid(mu, k, strategy, &mut rng)?;
        let res = lloyd(mu, &g0, config)?;
        if best.as_ref().is_none_or(|b| res.distortion() < b.distortion()) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{distortion_gradient, quadratic_distortion};
    use crate::sampler::Sampler;
    use crate::seed::stream;

    #[test]
    fn three_atom_fixed_point() {
        let mu = DiscreteMeasure::<f64>::uniform_flat(1, vec![0.0, 0.4, 1.0]).unwrap();
        let g0 = QuantizationGrid::from_flat(1, vec![0.1, 0.9]).unwrap();
        let res = lloyd(&mu, &g0, LloydConfig::default()).unwrap();
        assert!(res.converged);
        assert!((res.grid.flat()[0] - 0.2).abs() < 1e-15);
        assert_eq!(res.grid.flat()[1], 1.0);
        assert!((res.distortion() - 0.08 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_grid_is_unchanged() {
        let mu = DiscreteMeasure::uniform_flat(1, vec![0.0, 1.0, 3.0, 5.0]).unwrap();
        let g0 = QuantizationGrid::from_flat(1, vec![0.5, 4.0]).unwrap();
        let res = lloyd(&mu, &g0, LloydConfig::default()).unwrap();
        assert_eq!(res.grid, g0);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn uniform_interval_closed_form() {
        let s = Sampler::<f64>::uniform_cube(1).unwrap();
        let mu = s.sample_measure(10_000, &mut stream(21, 0)).unwrap();
        let res = lloyd_restarts(&mu, 2, InitStrategy::DSquared, 1, 5, LloydConfig::default()).unwrap();
        let mut c = res.grid.flat().to_vec();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.25).abs() < 0.02 && (c[1] - 0.75).abs() < 0.02, "{c:?}");
        assert!((res.distortion() - 1.0 / 48.0).abs() < 0.1 / 48.0);
        for g in distortion_gradient(&mu, &res.grid).unwrap() {
            assert!(g.norm() < 1e-9);
        }
    }

    #[test]
    fn distortion_never_increases() {
        let s = Sampler::<f64>::uniform_cube(2).unwrap();
        let mu = s.sample_measure(2_000, &mut stream(2, 0)).unwrap();
        let g0 = QuantizationGrid::from_flat(2, mu.coords()[..16].to_vec()).unwrap();
        let res = lloyd(&mu, &g0, LloydConfig::default()).unwrap();
        for w in res.distortions.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
        assert_eq!(res.distortion(), quadratic_distortion(&mu, &res.grid).unwrap());
    }

    #[test]
    fn empty_cell_is_reseeded() {
        let mu = DiscreteMeasure::uniform_flat(1, vec![0.0, 1.0, 2.0, 10.0]).unwrap();
        // centroid 100 owns nothing
        let g0 = QuantizationGrid::from_flat(1, vec![1.0, 100.0]).unwrap();
        let res = lloyd(&mu, &g0, LloydConfig::default()).unwrap();
        assert!(res.empty_cell_resolved());
        let mut c = res.grid.flat().to_vec();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![1.0, 10.0]);
        for w in res.distortions.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
