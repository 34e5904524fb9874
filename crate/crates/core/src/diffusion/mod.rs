//! Forward noising and analytic-score reverse diffusion of discrete
//! reference measures, with the constants that control how the reverse
//! flow propagates Wasserstein error.
//!
//! For a reference `mu = sum w_i delta(a_i)` the forward marginal at time
//! `t` is a Gaussian mixture with means `s(t) a_i` and covariance
//! `v(t) I`: `s = 1, v = t` for Brownian motion, `s = e^{-t/2},
//! v = 1 - e^{-t}` for the Ornstein-Uhlenbeck process. Its score is
//! available in closed form, so no network is trained.

mod bound;

pub use bound::{corollary_rate_check, verify_main_theorem, BoundReport, CorollaryReport};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::measure::{DiscreteMeasure, Point};
use crate::scalar::{log_sum_exp, Real};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdeKind {
    /// `dX = dW`.
    Brownian,
    /// `dX = -X/2 dt + dW`.
    OrnsteinUhlenbeck,
}

/// Noising process, horizon `T`, early-stop time `delta` and the number of
/// uniform reverse steps over `[0, T - delta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeSpec<T> {
    pub kind: SdeKind,
    pub horizon: T,
    pub delta: T,
    pub n_steps: usize,
}

impl<T: Real> SdeSpec<T> {
    pub const DEFAULT_STEPS: usize = 400;

    pub fn new(kind: SdeKind, horizon: T, delta: T, n_steps: usize) -> Result<Self> {
        let s = Self {
            kind,
            horizon,
            delta,
            n_steps,
        };
        s.validate()?;
        Ok(s)
    }

    /// Requires `1e-3 T <= delta < T` and at least one step.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > T::zero()) {
            return Err(Error::InvalidSpec(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.delta >= T::of(1e-3) * self.horizon && self.delta < self.horizon) {
            return Err(Error::InvalidSpec(format!(
                "delta {} must lie in [1e-3 T, T) for T = {}",
                self.delta, self.horizon
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidSpec("at least one reverse step is required".into()));
        }
        Ok(())
    }

    /// Mean scale `s(t)` and per-coordinate variance `v(t)` of the
    /// transition from time 0.
    pub fn marginal(&self, t: T) -> (T, T) {
        match self.kind {
            SdeKind::Brownian => (T::one(), t),
            SdeKind::OrnsteinUhlenbeck => ((-t * T::of(0.5)).exp(), -(-t).exp_m1()),
        }
    }

    fn check_time(&self, t: T) -> Result<()> {
        self.validate()?;
        if t > T::zero() && t <= self.horizon {
            Ok(())
        } else {
            Err(Error::InvalidTime {
                t: t.as_f64(),
                horizon: self.horizon.as_f64(),
            })
        }
    }
}

/// Compactly supported reference measure and its radius `R = max |a_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLaw<T> {
    base: DiscreteMeasure<T>,
    radius: T,
}

impl<T: Real> ReferenceLaw<T> {
    pub fn new(base: DiscreteMeasure<T>) -> Self {
        let radius = base.support_radius();
        Self { base, radius }
    }

    pub fn base(&self) -> &DiscreteMeasure<T> {
        &self.base
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `ln w_i - |x - s a_i|^2 / 2v`, `-inf` for massless atoms.
    fn logits_into(&self, s: T, v: T, x: &[T], out: &mut Vec<T>) {
        out.clear();
        let two_v = v + v;
        out.extend(self.base.atoms().zip(self.base.weights()).map(|(a, &w)| {
            if w > T::zero() {
                let d2: T = a.iter().zip(x).map(|(&ai, &xi)| (xi - s * ai) * (xi - s * ai)).sum();
                w.ln() - d2 / two_v
            } else {
                T::neg_infinity()
            }
        }));
    }

    /// Score into `out`; `logits` is scratch space.
    fn score_into(&self, s: T, v: T, x: &[T], logits: &mut Vec<T>, out: &mut [T]) {
        self.logits_into(s, v, x, logits);
        let lse = log_sum_exp(logits);
        out.fill(T::zero());
        for (a, &l) in self.base.atoms().zip(logits.iter()) {
            let r = (l - lse).exp();
            if r > T::zero() {
                for (o, &ai) in out.iter_mut().zip(a) {
                    *o += r * ai;
                }
            }
        }
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = (s * *o - xi) / v;
        }
    }
}

/// `n` exact draws of the forward marginal at time `t`, uniformly weighted.
pub fn forward_marginal<T: Real>(
    reference: &ReferenceLaw<T>,
    sde: &SdeSpec<T>,
    t: T,
    n: usize,
    seed: u64,
) -> Result<DiscreteMeasure<T>> {
    sde.check_time(t)?;
    if n == 0 {
        return Err(Error::InvalidSpec("at least one sample is required".into()));
    }
    let (s, v) = sde.marginal(t);
    let sd = v.sqrt();
    let d = reference.dim();
    let weights: Vec<f64> = reference.base.weights().iter().map(|w| w.as_f64()).collect();
    let index = WeightedIndex::new(&weights).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    let mut rng = seed::stream(seed, 0);
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        let a = reference.base.atom(index.sample(&mut rng));
        for &ai in a {
            let z: f64 = StandardNormal.sample(&mut rng);
            coords.push(s * ai + sd * T::of(z));
        }
    }
    DiscreteMeasure::uniform_flat(d, coords)
}

/// `grad_x log p_t(x)` of the forward marginal.
pub fn analytic_score<T: Real>(reference: &ReferenceLaw<T>, sde: &SdeSpec<T>, t: T, x: &[T]) -> Result<Point<T>> {
    sde.check_time(t)?;
    check_dim(reference.dim(), x.len())?;
    let (s, v) = sde.marginal(t);
    let mut out = vec![T::zero(); x.len()];
    reference.score_into(s, v, x, &mut Vec::new(), &mut out);
    Point::new(out)
}

/// `log p_t(x)` of the forward marginal.
pub fn log_density<T: Real>(reference: &ReferenceLaw<T>, sde: &SdeSpec<T>, t: T, x: &[T]) -> Result<T> {
    sde.check_time(t)?;
    check_dim(reference.dim(), x.len())?;
    let (s, v) = sde.marginal(t);
    let mut logits = Vec::new();
    reference.logits_into(s, v, x, &mut logits);
    let half_d = T::of_usize(x.len()) * T::of(0.5);
    Ok(log_sum_exp(&logits) - half_d * (T::TAU() * v).ln())
}

/// Euler-Maruyama integration of the reverse SDE from time `T` down to
/// `delta`, one trajectory per atom of `start`.
///
/// In auxiliary time `s` the drift is `score_{T-s}(x)`, plus `x/2` for the
/// Ornstein-Uhlenbeck process, always against `reference`. Atom `i` draws
/// its noise from stream `i` of `seed`, so two calls with the same seed
/// drive same-index atoms with the same Brownian path. Weights are copied.
pub fn reverse_integrate<T: Real>(
    start: &DiscreteMeasure<T>,
    reference: &ReferenceLaw<T>,
    sde: &SdeSpec<T>,
    seed: u64,
) -> Result<DiscreteMeasure<T>> {
    sde.validate()?;
    check_dim(reference.dim(), start.dim())?;
    let d = start.dim();
    let h = (sde.horizon - sde.delta) / T::of_usize(sde.n_steps);
    let sqrt_h = h.sqrt();
    let ou = sde.kind == SdeKind::OrnsteinUhlenbeck;
    let schedule: Vec<(T, T)> = (0..sde.n_steps)
        .map(|j| sde.marginal(sde.horizon - T::of_usize(j) * h))
        .collect();
    let mut coords = start.coords().to_vec();
    let mut logits = Vec::with_capacity(reference.base.len());
    let mut drift = vec![T::zero(); d];
    for (i, x) in coords.chunks_exact_mut(d).enumerate() {
        let mut rng = seed::stream(seed, i as u64);
        for &(s, v) in &schedule {
            reference.score_into(s, v, x, &mut logits, &mut drift);
            for (xk, &gk) in x.iter_mut().zip(&drift) {
                let z: f64 = StandardNormal.sample(&mut rng);
                let mut b = gk;
                if ou {
                    b += *xk * T::of(0.5);
                }
                *xk += h * b + sqrt_h * T::of(z);
            }
        }
    }
    DiscreteMeasure::from_flat(d, coords, start.weights().to_vec())
}

/// Logarithm of [`explicit_constant`].
pub fn log_explicit_constant<T: Real>(sde: &SdeSpec<T>, radius: T) -> Result<T> {
    sde.validate()?;
    if !(radius.is_finite() && radius >= T::zero()) {
        return Err(Error::InvalidSpec(format!("radius {radius} must be nonnegative")));
    }
    let (t0, t1) = (sde.delta, sde.horizon);
    let r2 = radius * radius;
    Ok(match sde.kind {
        SdeKind::Brownian => r2 * (t0.recip() - t1.recip()) - (t1 / t0).ln(),
        SdeKind::OrnsteinUhlenbeck => {
            let inv_var = |t: T| -(-t).exp_m1().recip();
            r2 * (inv_var(t0) - inv_var(t1)) - (t1.exp_m1() / t0.exp_m1()).ln()
        }
    })
}

/// `C = exp int_delta^T k(t) dt` with `k(t) = R^2/t^2 - 1/t` for Brownian
/// motion and `k(t) = R^2 e^{-t}/(1 - e^{-t})^2 - 1/(1 - e^{-t})` for the
/// Ornstein-Uhlenbeck process, in closed form.
pub fn explicit_constant<T: Real>(sde: &SdeSpec<T>, radius: T) -> Result<T> {
    Ok(log_explicit_constant(sde, radius)?.exp())
}

/// Lipschitz constant of the reverse flow from `T` to `delta`.
///
/// Equal to [`explicit_constant`] for Brownian motion. The
/// Ornstein-Uhlenbeck reverse drift carries an extra `x/2`, which adds
/// `(T - delta)/2` to the exponent.
pub fn contraction_constant<T: Real>(sde: &SdeSpec<T>, radius: T) -> Result<T> {
    let mut log_c = log_explicit_constant(sde, radius)?;
    if sde.kind == SdeKind::OrnsteinUhlenbeck {
        log_c += (sde.horizon - sde.delta) * T::of(0.5);
    }
    Ok(log_c.exp())
}

/// One-sided Lipschitz bound of the score at time `t`:
/// `<x - y, score(x) - score(y)> <= k(t) |x - y|^2` with
/// `k(t) = R_t^2 / v^2 - 1/v`, `R_t = s(t) R`.
pub fn monotonicity_bound<T: Real>(kind: SdeKind, t: T, radius: T) -> T {
    let spec = SdeSpec {
        kind,
        horizon: t,
        delta: t,
        n_steps: 1,
    };
    let (s, v) = spec.marginal(t);
    let rt = s * radius;
    rt * rt / (v * v) - v.recip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::dot;
    use crate::seed::stream;
    use rand::Rng;

    fn two_atoms() -> ReferenceLaw<f64> {
        ReferenceLaw::new(DiscreteMeasure::uniform_flat(1, vec![-1.0, 1.0]).unwrap())
    }

    fn sde(kind: SdeKind, horizon: f64, delta: f64, n_steps: usize) -> SdeSpec<f64> {
        SdeSpec::new(kind, horizon, delta, n_steps).unwrap()
    }

    fn moments(m: &DiscreteMeasure<f64>) -> (f64, f64) {
        let n = m.len() as f64;
        let mean = m.coords().iter().sum::<f64>() / n;
        let var = m.coords().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn spec_validation() {
        assert!(SdeSpec::new(SdeKind::Brownian, 1.0, 0.0, 10).is_err());
        assert!(SdeSpec::new(SdeKind::Brownian, 1.0, 1e-4, 10).is_err());
        assert!(SdeSpec::new(SdeKind::Brownian, 1.0, 1.0, 10).is_err());
        assert!(SdeSpec::new(SdeKind::Brownian, 1.0, 0.5, 0).is_err());
        assert!(SdeSpec::new(SdeKind::OrnsteinUhlenbeck, 1.0, 1e-3, 1).is_ok());
    }

    #[test]
    fn radius_is_max_atom_norm() {
        let r = ReferenceLaw::new(DiscreteMeasure::uniform_flat(2, vec![3.0, 4.0, -1.0, 0.0]).unwrap());
        assert_eq!(r.radius(), 5.0);
    }

    #[test]
    fn forward_marginal_moments() {
        let n = 100_000;
        let origin = ReferenceLaw::new(DiscreteMeasure::dirac(Point::new(vec![0.0]).unwrap()));
        let (m, v) = moments(&forward_marginal(&origin, &sde(SdeKind::Brownian, 1.0, 0.1, 10), 0.5, n, 1).unwrap());
        let se = (0.5f64 / n as f64).sqrt();
        assert!(m.abs() < 5.0 * se);
        // var of the sample variance of a Gaussian is 2 sigma^4 / (n - 1)
        assert!((v - 0.5).abs() < 5.0 * 0.5 * (2.0 / n as f64).sqrt());

        let one = ReferenceLaw::new(DiscreteMeasure::dirac(Point::new(vec![1.0]).unwrap()));
        let t = 4f64.ln();
        let (m, v) = moments(&forward_marginal(&one, &sde(SdeKind::OrnsteinUhlenbeck, 2.0, 0.1, 10), t, n, 2).unwrap());
        assert!((m - 0.5).abs() < 5.0 * (0.75 / n as f64).sqrt());
        assert!((v - 0.75).abs() < 5.0 * 0.75 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn time_is_checked() {
        let r = two_atoms();
        let s = sde(SdeKind::Brownian, 1.0, 0.1, 10);
        assert!(matches!(forward_marginal(&r, &s, 1.5, 10, 0), Err(Error::InvalidTime { .. })));
        assert!(matches!(analytic_score(&r, &s, 0.0, &[0.0]), Err(Error::InvalidTime { .. })));
    }

    #[test]
    fn score_examples() {
        let origin = ReferenceLaw::new(DiscreteMeasure::dirac(Point::new(vec![0.0]).unwrap()));
        let s = sde(SdeKind::Brownian, 1.0, 0.1, 10);
        assert_eq!(analytic_score(&origin, &s, 0.5, &[1.0]).unwrap().as_slice(), &[-2.0]);
        for t in [0.1, 0.5, 1.0] {
            assert_eq!(analytic_score(&two_atoms(), &s, t, &[0.0]).unwrap().as_slice(), &[0.0]);
        }
        // far from the support the score stays finite
        let far = analytic_score(&two_atoms(), &s, 0.1, &[1e6]).unwrap();
        assert!(far.as_slice()[0].is_finite());
    }

    #[test]
    fn score_is_the_gradient_of_log_density() {
        let mut rng = stream(5, 0);
        let base = DiscreteMeasure::normalized(
            2,
            (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let r = ReferenceLaw::new(base);
        for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
            let s = sde(kind, 1.0, 0.1, 10);
            for t in [0.2, 1.0] {
                let x = [0.3, -0.4];
                let g = analytic_score(&r, &s, t, &x).unwrap();
                let h = 1e-5;
                for k in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (log_density(&r, &s, t, &xp).unwrap() - log_density(&r, &s, t, &xm).unwrap()) / (2.0 * h);
                    let gk = g.as_slice()[k];
                    assert!((fd - gk).abs() <= 1e-6 * gk.abs().max(1.0), "{kind:?} t={t}: {fd} vs {gk}");
                }
            }
        }
    }

    #[test]
    fn score_satisfies_the_monotonicity_bound() {
        let mut rng = stream(6, 0);
        let base = DiscreteMeasure::normalized(
            2,
            (0..10).map(|_| rng.random_range(-1.5..1.5)).collect(),
            (0..5).map(|_| rng.random_range(0.1..1.0)).collect(),
        )
        .unwrap();
        let r = ReferenceLaw::new(base);
        for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
            let s = sde(kind, 2.0, 0.01, 10);
            for t in [0.05, 0.5, 2.0] {
                let k = monotonicity_bound(kind, t, r.radius());
                for _ in 0..1000 {
                    let x: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
                    let y: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
                    let gx = analytic_score(&r, &s, t, &x).unwrap();
                    let gy = analytic_score(&r, &s, t, &y).unwrap();
                    let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                    let dg: Vec<f64> = gx.as_slice().iter().zip(gy.as_slice()).map(|(a, b)| a - b).collect();
                    assert!(dot(&dx, &dg) <= k * dot(&dx, &dx) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn constant_examples() {
        let b = sde(SdeKind::Brownian, 1.0, 0.5, 10);
        let log_c = log_explicit_constant(&b, 1.0).unwrap();
        assert!((log_c - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((explicit_constant(&b, 1.0).unwrap() - 1.359140914229522).abs() < 1e-12);
        assert!((explicit_constant(&b, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let ou = sde(SdeKind::OrnsteinUhlenbeck, 1.0, 0.5, 10);
        let expected = -((1f64.exp() - 1.0) / (0.5f64.exp() - 1.0)).ln();
        assert!((log_explicit_constant(&ou, 0.0).unwrap() - expected).abs() < 1e-14);
        assert!((expected + 0.97408).abs() < 1e-5);
        assert!(explicit_constant(&ou, -1.0).is_err());
        let ratio = contraction_constant(&ou, 0.7).unwrap() / explicit_constant(&ou, 0.7).unwrap();
        assert!((ratio - 0.25f64.exp()).abs() < 1e-12);
        assert_eq!(contraction_constant(&b, 0.7).unwrap(), explicit_constant(&b, 0.7).unwrap());
    }

    #[test]
    fn reverse_integration_is_deterministic_and_keeps_weights() {
        let r = two_atoms();
        let s = sde(SdeKind::OrnsteinUhlenbeck, 1.0, 0.1, 50);
        let start = DiscreteMeasure::from_flat(1, vec![0.3, -2.0, 1.0], vec![0.2, 0.3, 0.5]).unwrap();
        let a = reverse_integrate(&start, &r, &s, 4).unwrap();
        let b = reverse_integrate(&start, &r, &s, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights(), start.weights());
        assert_ne!(reverse_integrate(&start, &r, &s, 5).unwrap(), a);
    }

    #[test]
    fn reverse_integration_recovers_the_early_marginal() {
        let origin = ReferenceLaw::new(DiscreteMeasure::dirac(Point::new(vec![0.0]).unwrap()));
        let s = sde(SdeKind::Brownian, 1.0, 0.1, 400);
        let n = 20_000;
        let start = forward_marginal(&origin, &s, 1.0, n, 8).unwrap();
        let (m, v) = moments(&reverse_integrate(&start, &origin, &s, 9).unwrap());
        let se_var = 0.1 * (2.0 / n as f64).sqrt();
        assert!((v - 0.1).abs() <= 5.0 * se_var + 0.05 * 0.1, "{v}");
        assert!(m.abs() <= 5.0 * (0.1 / n as f64).sqrt() + 0.05 * 0.1, "{m}");
    }
}
