//! Exact Wasserstein-2 distances between discrete measures and the
//! quantization comparisons built on them.

mod rate;
mod simplex;

pub use rate::{log_log_slope, quantizer_ladder, rate_scan, RateScan};

use crate::error::{check_dim, Result};
use crate::measure::{project_to_grid, quadratic_distortion, DiscreteMeasure, QuantizationGrid};
use crate::scalar::{sq_dist, Real};

/// Above this many atom pairs the cost matrix is evaluated on the fly.
const DENSE_COST_LIMIT: usize = 1 << 23;

/// Optimal coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    /// `(source atom, target atom, mass)`, sorted, positive masses only.
    pub flows: Vec<(usize, usize, T)>,
    /// `sum mass * |x - y|^2`.
    pub cost: T,
    /// Value of an exactly feasible dual solution; never above the optimum.
    pub dual_bound: T,
    pub pivots: usize,
}

impl<T: Real> TransportPlan<T> {
    pub fn row_sums(&self, n: usize) -> Vec<T> {
        let mut r = vec![T::zero(); n];
        for &(i, _, f) in &self.flows {
            r[i] += f;
        }
        r
    }

    pub fn col_sums(&self, m: usize) -> Vec<T> {
        let mut c = vec![T::zero(); m];
        for &(_, j, f) in &self.flows {
            c[j] += f;
        }
        c
    }

    /// Cost recomputed from the atoms of the two marginals.
    pub fn recompute_cost(&self, mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> T {
        let mut total = T::zero();
        for &(i, j, f) in &self.flows {
            total += f * sq_dist(mu.atom(i), nu.atom(j));
        }
        total
    }

    /// Largest deviation of the plan's marginals from `mu` and `nu`.
    pub fn marginal_error(&self, mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> T {
        let rows = self.row_sums(mu.len());
        let cols = self.col_sums(nu.len());
        rows.iter()
            .zip(mu.weights())
            .chain(cols.iter().zip(nu.weights()))
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Exact `W2(mu, nu)` and an optimal plan.
pub fn w2_discrete<T: Real>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Result<(T, TransportPlan<T>)> {
    check_dim(mu.dim(), nu.dim())?;
    let (n, m) = (mu.len(), nu.len());
    let sol = if n * m <= DENSE_COST_LIMIT {
        let mut costs = Vec::with_capacity(n * m);
        for a in mu.atoms() {
            for b in nu.atoms() {
                costs.push(sq_dist(a, b));
            }
        }
        simplex::solve(mu.weights(), nu.weights(), &|i: usize, j: usize| costs[i * m + j])?
    } else {
        simplex::solve(mu.weights(), nu.weights(), &|i: usize, j: usize| sq_dist(mu.atom(i), nu.atom(j)))?
    };
    let plan = TransportPlan {
        flows: sol.flows,
        cost: sol.cost,
        dual_bound: sol.dual_bound,
        pivots: sol.pivots,
    };
    Ok((plan.cost.max(T::zero()).sqrt(), plan))
}

/// `sqrt(G(x))`, the smallest `W2` from `mu` to any measure on the grid.
pub fn w2_to_grid<T: Real>(mu: &DiscreteMeasure<T>, grid: &QuantizationGrid<T>) -> Result<T> {
    Ok(quadratic_distortion(mu, grid)?.sqrt())
}

/// Cell-mass weights against uniform weights on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingComparison<T> {
    pub weighted_w2: T,
    pub uniform_w2: T,
    /// `1 - weighted / uniform`.
    pub reduction_fraction: T,
    pub weighted_plan: TransportPlan<T>,
}

pub fn compare_weighting<T: Real>(
    mu: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
) -> Result<WeightingComparison<T>> {
    check_dim(grid.dim(), mu.dim())?;
    if grid.k() > mu.len() {
        return Err(crate::Error::InsufficientPoints {
            needed: grid.k(),
            found: mu.len(),
        });
    }
    let nu = project_to_grid(mu, grid)?;
    let (weighted_w2, weighted_plan) = w2_discrete(&nu, mu)?;
    let (uniform_w2, _) = w2_discrete(&grid.uniform_measure(), mu)?;
    let reduction_fraction = if uniform_w2 > T::zero() {
        T::one() - weighted_w2 / uniform_w2
    } else {
        T::zero()
    };
    Ok(WeightingComparison {
        weighted_w2,
        uniform_w2,
        reduction_fraction,
        weighted_plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn m1(xs: &[f64], ws: &[f64]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::from_flat(1, xs.to_vec(), ws.to_vec()).unwrap()
    }

    fn random_measure(rng: &mut impl Rng, n: usize, d: usize) -> DiscreteMeasure<f64> {
        let coords = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let raw = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        DiscreteMeasure::normalized(d, coords, raw).unwrap()
    }

    /// W2^2 in 1D through the quantile coupling.
    fn w2_sq_1d(mu: &DiscreteMeasure<f64>, nu: &DiscreteMeasure<f64>) -> f64 {
        let sorted = |m: &DiscreteMeasure<f64>| {
            let mut v: Vec<(f64, f64)> = m.atoms().map(|a| a[0]).zip(m.weights().iter().copied()).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        let (a, b) = (sorted(mu), sorted(nu));
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0].1, b[0].1);
        let mut cost = 0.0;
        while i < a.len() && j < b.len() {
            let f = ra.min(rb);
            cost += f * (a[i].0 - b[j].0).powi(2);
            ra -= f;
            rb -= f;
            if ra <= rb {
                i += 1;
                if i < a.len() {
                    ra = a[i].1;
                }
            } else {
                j += 1;
                if j < b.len() {
                    rb = b[j].1;
                }
            }
        }
        cost
    }

    #[test]
    fn dirac_examples() {
        let (w, plan) = w2_discrete(&m1(&[0.0], &[1.0]), &m1(&[1.0], &[1.0])).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(plan.flows, vec![(0, 0, 1.0)]);
        let (w, _) = w2_discrete(&m1(&[0.0, 1.0], &[0.5, 0.5]), &m1(&[0.5], &[1.0])).unwrap();
        assert_eq!(w, 0.5);
    }

    #[test]
    fn grid_distance_examples() {
        let mu = DiscreteMeasure::uniform_flat(1, vec![0.0, 0.4, 1.0]).unwrap();
        let grid = QuantizationGrid::from_flat(1, vec![0.0, 1.0]).unwrap();
        let expected = (0.16f64 / 3.0).sqrt();
        assert!((w2_to_grid(&mu, &grid).unwrap() - expected).abs() < 1e-15);
        let (w, _) = w2_discrete(&project_to_grid(&mu, &grid).unwrap(), &mu).unwrap();
        assert!((w - expected).abs() < 1e-12);
        assert!((expected - 0.23094).abs() < 1e-5);
        let on_grid = grid.measure_with(vec![0.3, 0.7]).unwrap();
        assert_eq!(w2_to_grid(&on_grid, &grid).unwrap(), 0.0);
    }

    #[test]
    fn projection_equality_on_random_instance() {
        let mut rng = stream(40, 0);
        let mu = random_measure(&mut rng, 40, 2);
        let grid = QuantizationGrid::from_flat(2, (0..10).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let (w, plan) = w2_discrete(&project_to_grid(&mu, &grid).unwrap(), &mu).unwrap();
        let g = quadratic_distortion(&mu, &grid).unwrap();
        assert!((w * w - g).abs() <= 1e-9 * g);
        assert!(plan.cost - plan.dual_bound <= 1e-9 * (1.0 + plan.cost));
    }

    #[test]
    fn weighting_comparison_examples() {
        // cell masses already uniform
        let mu = DiscreteMeasure::<f64>::uniform_flat(1, vec![-1.1, -0.9, 0.9, 1.1]).unwrap();
        let grid = QuantizationGrid::from_flat(1, vec![-1.0, 1.0]).unwrap();
        let c = compare_weighting(&mu, &grid).unwrap();
        assert!(c.reduction_fraction.abs() < 1e-12);

        // 0.9 / 0.1 two-cluster data at the cluster centres
        let mut coords = Vec::new();
        for i in 0..9 {
            coords.push(-0.1 + 0.025 * i as f64);
        }
        coords.push(10.0);
        let mu = DiscreteMeasure::uniform_flat(1, coords).unwrap();
        let grid = QuantizationGrid::from_flat(1, vec![0.0, 10.0]).unwrap();
        let c = compare_weighting(&mu, &grid).unwrap();
        assert!(c.uniform_w2 > c.weighted_w2);
        let total: f64 = c.weighted_plan.flows.iter().filter(|f| f.0 == 0).map(|f| f.2).sum();
        assert!((total - 0.9).abs() < 1e-12);
        assert!(c.weighted_plan.flows.iter().all(|&(i, j, _)| (i == 1) == (j == 9)));
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteMeasure::uniform_flat(1, vec![0.0]).unwrap();
        let b = DiscreteMeasure::uniform_flat(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(w2_discrete(&a, &b), Err(crate::Error::Dimension { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_quantile_coupling_in_1d(seed in any::<u64>(), n in 1usize..12, m in 1usize..12) {
            let mut rng = stream(seed, 0);
            let mu = random_measure(&mut rng, n, 1);
            let nu = random_measure(&mut rng, m, 1);
            let (w, plan) = w2_discrete(&mu, &nu).unwrap();
            let exact = w2_sq_1d(&mu, &nu);
            prop_assert!((w * w - exact).abs() <= 1e-9 * (1.0 + exact));
            prop_assert!(plan.marginal_error(&mu, &nu) <= 1e-9);
            prop_assert!((plan.recompute_cost(&mu, &nu) - plan.cost).abs() <= 1e-9);
            prop_assert!(plan.flows.iter().all(|f| f.2 >= 0.0));
        }

        #[test]
        fn metric_properties(seed in any::<u64>(), d in 1usize..4) {
            let mut rng = stream(seed, 0);
            let a = random_measure(&mut rng, 6, d);
            let b = random_measure(&mut rng, 5, d);
            let c = random_measure(&mut rng, 7, d);
            let ab = w2_discrete(&a, &b).unwrap().0;
            let ba = w2_discrete(&b, &a).unwrap().0;
            let bc = w2_discrete(&b, &c).unwrap().0;
            let ac = w2_discrete(&a, &c).unwrap().0;
            prop_assert_eq!(w2_discrete(&a, &a).unwrap().0, 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
            prop_assert!(ac <= ab + bc + 1e-9);
            let s = 2.5;
            let scaled = w2_discrete(&a.scaled(s), &b.scaled(s)).unwrap().0;
            prop_assert!((scaled - s * ab).abs() <= 1e-12 * (1.0 + s * ab));
        }

        #[test]
        fn cell_masses_beat_random_weights(seed in any::<u64>()) {
            let mut rng = stream(seed, 0);
            let mu = random_measure(&mut rng, 15, 2);
            let grid = QuantizationGrid::from_flat(2, (0..8).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let best = w2_discrete(&project_to_grid(&mu, &grid).unwrap(), &mu).unwrap().0;
            for _ in 0..100 {
                let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 1e-3).collect();
                let nu = DiscreteMeasure::normalized(2, grid.flat().to_vec(), raw).unwrap();
                prop_assert!(w2_discrete(&nu, &mu).unwrap().0 >= best - 1e-12);
            }
        }
    }
}
