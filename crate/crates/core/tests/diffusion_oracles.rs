//! Reverse diffusion against closed-form mixture laws.

use optquant::diffusion::{
    contraction_constant, forward_marginal, log_density, reverse_integrate, ReferenceLaw, SdeKind, SdeSpec,
};
use optquant::measure::{DiscreteMeasure, Point};
use optquant::seed::derive_seed;
use statrs::distribution::{ContinuousCDF, Normal};

fn two_atoms() -> ReferenceLaw<f64> {
    ReferenceLaw::new(DiscreteMeasure::from_flat(1, vec![-1.0, 1.0], vec![0.3, 0.7]).unwrap())
}

/// CDF at `x` of the diffused reference at time `t`.
fn mixture_cdf(reference: &ReferenceLaw<f64>, sde: &SdeSpec<f64>, t: f64, x: f64) -> f64 {
    let (s, v) = sde.marginal(t);
    let sd = v.sqrt();
    reference
        .base()
        .atoms()
        .zip(reference.base().weights())
        .map(|(a, &w)| w * Normal::new(s * a[0], sd).unwrap().cdf(x))
        .sum()
}

/// Kolmogorov-Smirnov statistic of an equally weighted sample.
fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// sqrt(n) D exceeds 1.95 with probability 0.001 under the null
const KS_CRITICAL: f64 = 1.95;

#[test]
fn forward_marginal_matches_mixture_cdf() {
    let r = two_atoms();
    for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
        let sde = SdeSpec::new(kind, 2.0, 0.1, 100).unwrap();
        for (i, t) in [0.1, 0.7, 2.0].into_iter().enumerate() {
            let n = 5000;
            let m = forward_marginal(&r, &sde, t, n, derive_seed(11, i as u64)).unwrap();
            let d = ks_statistic(m.coords(), |x| mixture_cdf(&r, &sde, t, x));
            assert!(d * (n as f64).sqrt() < KS_CRITICAL, "{kind:?} t={t}: D={d}");
        }
    }
}

#[test]
fn reverse_paths_reach_the_diffused_reference() {
    let r = two_atoms();
    for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
        let sde = SdeSpec::new(kind, 1.0, 0.25, 400).unwrap();
        let n = 4000;
        let start = forward_marginal(&r, &sde, sde.horizon, n, 5).unwrap();
        let end = reverse_integrate(&start, &r, &sde, 6).unwrap();
        let d = ks_statistic(end.coords(), |x| mixture_cdf(&r, &sde, sde.delta, x));
        assert!(d * (n as f64).sqrt() < KS_CRITICAL, "{kind:?}: D={d}");
    }
}

#[test]
fn common_noise_paths_contract() {
    // R = 1 keeps the constant small enough for the check to bite
    let r = ReferenceLaw::new(DiscreteMeasure::uniform_flat(1, vec![-1.0, 1.0]).unwrap());
    for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
        let sde = SdeSpec::new(kind, 1.0, 0.5, 400).unwrap();
        let c = contraction_constant(&sde, r.radius()).unwrap();
        assert!(c < 3.0, "{c}");
        for (x, y) in [(0.0f64, 0.3f64), (-2.0, 1.5), (0.9, 1.1)] {
            let n = 2000;
            let xs = DiscreteMeasure::uniform_flat(1, vec![x; n]).unwrap();
            let ys = DiscreteMeasure::uniform_flat(1, vec![y; n]).unwrap();
            let ex = reverse_integrate(&xs, &r, &sde, 9).unwrap();
            let ey = reverse_integrate(&ys, &r, &sde, 9).unwrap();
            let mean_gap = ex.coords().iter().zip(ey.coords()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
            assert!(mean_gap <= 1.05 * c * (x - y).abs(), "{kind:?} ({x}, {y}): {mean_gap} vs C={c}");
        }
    }
}

/// Composite Simpson rule on `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + inner + f(b))
}

#[test]
fn density_integrates_to_one() {
    let r1 = two_atoms();
    for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
        let sde = SdeSpec::new(kind, 1.0, 0.1, 10).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let mass = simpson(|x| log_density(&r1, &sde, t, &[x]).unwrap().exp(), -12.0, 12.0, 4000);
            assert!((mass - 1.0).abs() <= 1e-6, "{kind:?} t={t}: {mass}");
        }
    }

    let r2 = ReferenceLaw::new(
        DiscreteMeasure::from_flat(2, vec![0.0, 0.0, 1.0, -0.5, -0.8, 0.6], vec![0.5, 0.25, 0.25]).unwrap(),
    );
    let sde = SdeSpec::new(SdeKind::Brownian, 1.0, 0.1, 10).unwrap();
    let mass = simpson(
        |y| simpson(|x| log_density(&r2, &sde, 0.3, &[x, y]).unwrap().exp(), -6.0, 6.0, 600),
        -6.0,
        6.0,
        600,
    );
    assert!((mass - 1.0).abs() <= 1e-6, "{mass}");
}

/// `|Var - delta|` at the end of reverse paths from `N(0, T)` under the
/// score of a point mass at the origin.
fn variance_bias(n_steps: usize, seed: u64) -> f64 {
    let origin = ReferenceLaw::new(DiscreteMeasure::dirac(Point::new(vec![0.0]).unwrap()));
    let sde = SdeSpec::new(SdeKind::Brownian, 1.0, 0.1, n_steps).unwrap();
    let n = 40_000;
    let start = forward_marginal(&origin, &sde, sde.horizon, n, derive_seed(seed, 0)).unwrap();
    let end = reverse_integrate(&start, &origin, &sde, derive_seed(seed, 1)).unwrap();
    let var = end.coords().iter().map(|x| x * x).sum::<f64>() / n as f64;
    (var - sde.delta).abs()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn halving_the_step_shrinks_the_discretization_bias() {
    let steps = [5usize, 10, 20];
    let bias: Vec<f64> = steps.iter().map(|&s| median((0..5).map(|seed| variance_bias(s, seed)).collect())).collect();
    assert!(bias[1] < 0.75 * bias[0] && bias[2] < 0.75 * bias[1], "{bias:?}");
}
