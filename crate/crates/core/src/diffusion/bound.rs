use super::{contraction_constant, forward_marginal, reverse_integrate, ReferenceLaw, SdeSpec};
use crate::error::{Error, Result};
use crate::measure::{voronoi_partition, DiscreteMeasure, QuantizationGrid};
use crate::quantizer::{lloyd_restarts, InitStrategy, LloydConfig};
use crate::risk::LipschitzSpec;
use crate::scalar::Real;
use crate::seed::derive_seed;
use crate::transport::{log_log_slope, quantizer_ladder, w2_discrete};

const RESTARTS: usize = 3;

/// Outcome of one check of `|E_{mu_delta} f - E_{nu_delta} f| <= C L W2(mu_T, nu_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T> {
    /// Monte Carlo estimate of the left-hand side.
    pub lhs: T,
    /// `C L W2(mu_T, nu_T)`.
    pub rhs: T,
    pub mc_stderr: T,
    /// `lhs / rhs`; zero when both vanish, infinite when only `rhs` does.
    pub ratio: T,
    /// `lhs <= rhs + 3 mc_stderr`.
    pub pass: bool,
    pub w2: T,
    pub constant: T,
    pub lipschitz: T,
    pub k: usize,
    pub n_mc: usize,
    pub seed: u64,
}

/// Quantizes `n_mc` forward samples at time `T` with Lloyd at level `k`,
/// runs both measures back to `delta` under the reference score and
/// compares the expectations of `f`.
///
/// Every forward sample is paired with the centroid of its Voronoi cell
/// and both are driven by the same Brownian path. The centroid copies
/// form exactly the cell-mass measure `nu_T`, so the mean of the paired
/// differences estimates the left-hand side with a small standard error.
pub fn verify_main_theorem<T: Real>(
    reference: &ReferenceLaw<T>,
    sde: &SdeSpec<T>,
    k: usize,
    f: &LipschitzSpec<T>,
    n_mc: usize,
    seed: u64,
) -> Result<BoundReport<T>> {
    sde.validate()?;
    f.check_input_dim(reference.dim())?;
    let mu_t = forward_marginal(reference, sde, sde.horizon, n_mc, derive_seed(seed, 0))?;
    let q = lloyd_restarts(&mu_t, k, InitStrategy::DSquared, RESTARTS, derive_seed(seed, 1), LloydConfig::default())?;
    bound_for_grid(reference, sde, &mu_t, &q.grid, f, seed)
}

fn bound_for_grid<T: Real>(
    reference: &ReferenceLaw<T>,
    sde: &SdeSpec<T>,
    mu_t: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
    f: &LipschitzSpec<T>,
    seed: u64,
) -> Result<BoundReport<T>> {
    let part = voronoi_partition(mu_t, grid)?;
    let nu_t = grid.measure_with(part.cell_mass.clone())?;
    let (w2, _) = w2_discrete(&nu_t, mu_t)?;
    let d = mu_t.dim();
    let mut lifted = Vec::with_capacity(mu_t.len() * d);
    for &j in &part.assignment {
        lifted.extend_from_slice(grid.centroid(j));
    }
    let lifted = DiscreteMeasure::from_flat(d, lifted, mu_t.weights().to_vec())?;
    let noise = derive_seed(seed, 2);
    let end_mu = reverse_integrate(mu_t, reference, sde, noise)?;
    let end_nu = reverse_integrate(&lifted, reference, sde, noise)?;

    let diffs: Vec<T> = end_mu.atoms().zip(end_nu.atoms()).map(|(a, b)| f.eval(a) - f.eval(b)).collect();
    let w = mu_t.weights();
    let mean: T = diffs.iter().zip(w).map(|(&x, &wi)| wi * x).sum();
    let n = diffs.len();
    let mc_stderr = if n > 1 {
        let s: T = diffs.iter().zip(w).map(|(&x, &wi)| wi * wi * (x - mean) * (x - mean)).sum();
        (s * T::of_usize(n) / T::of_usize(n - 1)).sqrt()
    } else {
        T::zero()
    };

    let constant = contraction_constant(sde, reference.radius())?;
    let lipschitz = f.lipschitz();
    let lhs = mean.abs();
    let rhs = constant * lipschitz * w2;
    let ratio = if rhs > T::zero() {
        lhs / rhs
    } else if lhs == T::zero() {
        T::zero()
    } else {
        T::infinity()
    };
    Ok(BoundReport {
        lhs,
        rhs,
        mc_stderr,
        ratio,
        pass: lhs <= rhs + T::of(3.0) * mc_stderr,
        w2,
        constant,
        lipschitz,
        k: grid.k(),
        n_mc: n,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryReport<T> {
    pub levels: Vec<usize>,
    /// `W2(mu_T, nu_T^(K))` per level, non-increasing.
    pub w2: Vec<T>,
    pub reports: Vec<BoundReport<T>>,
    /// Least-squares slope of `ln W2` against `ln K`.
    pub w2_slope: T,
}

impl<T> CorollaryReport<T> {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// [`verify_main_theorem`] at every level in `ks`, sharing one forward
/// sample set, one noise seed and a nested quantizer ladder.
pub fn corollary_rate_check<T: Real>(
    reference: &ReferenceLaw<T>,
    sde: &SdeSpec<T>,
    ks: &[usize],
    f: &LipschitzSpec<T>,
    n_mc: usize,
    seed: u64,
) -> Result<CorollaryReport<T>> {
    sde.validate()?;
    f.check_input_dim(reference.dim())?;
    if ks.len() < 2 {
        return Err(Error::InvalidSpec("a rate fit needs at least two levels".into()));
    }
    let mu_t = forward_marginal(reference, sde, sde.horizon, n_mc, derive_seed(seed, 0))?;
    let ladder = quantizer_ladder(&mu_t, ks, RESTARTS, derive_seed(seed, 1), LloydConfig::default())?;
    let reports = ladder
        .iter()
        .map(|q| bound_for_grid(reference, sde, &mu_t, &q.grid, f, seed))
        .collect::<Result<Vec<_>>>()?;
    let w2: Vec<T> = reports.iter().map(|r| r.w2).collect();
    let levels: Vec<T> = ks.iter().map(|&k| T::of_usize(k)).collect();
    Ok(CorollaryReport {
        levels: ks.to_vec(),
        w2_slope: log_log_slope(&levels, &w2)?,
        w2,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::SdeKind;
    use crate::measure::Point;

    fn two_atoms() -> ReferenceLaw<f64> {
        ReferenceLaw::new(DiscreteMeasure::uniform_flat(1, vec![-1.0, 1.0]).unwrap())
    }

    #[test]
    fn constant_function_has_zero_gap() {
        let s = SdeSpec::new(SdeKind::Brownian, 1.0, 0.25, 100).unwrap();
        let r = verify_main_theorem(&two_atoms(), &s, 3, &LipschitzSpec::constant(2.0), 300, 1).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn full_resolution_quantizer_has_zero_gap() {
        let s = SdeSpec::new(SdeKind::OrnsteinUhlenbeck, 1.0, 0.25, 100).unwrap();
        let f = LipschitzSpec::distance_to_point(Point::new(vec![0.3]).unwrap());
        let r = verify_main_theorem(&two_atoms(), &s, 150, &f, 150, 2).unwrap();
        // Lloyd rebuilds each singleton centroid as (w x) / w, exact up to an ulp
        assert!(r.w2.abs() < 1e-12);
        assert!(r.lhs < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn two_atom_mixture_bound_holds() {
        let s = SdeSpec::new(SdeKind::Brownian, 1.0, 0.25, 400).unwrap();
        let f = LipschitzSpec::distance_to_point(Point::new(vec![0.3]).unwrap());
        let r = verify_main_theorem(&two_atoms(), &s, 8, &f, 5000, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.w2 > 0.0 && r.ratio < 1.0);
    }

    #[test]
    fn corollary_levels() {
        let s = SdeSpec::new(SdeKind::Brownian, 1.0, 0.25, 100).unwrap();
        let f = LipschitzSpec::distance_to_point(Point::new(vec![0.3]).unwrap());
        let r = corollary_rate_check(&two_atoms(), &s, &[2, 4, 8, 16], &f, 2000, 4).unwrap();
        assert!(r.w2.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.w2);
        assert!(r.all_pass());
        assert!((r.w2_slope + 1.0).abs() < 0.2, "{}", r.w2_slope);
    }
}
