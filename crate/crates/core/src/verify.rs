//! Claim-by-claim numerical verification suites.
//!
//! Every check produces a [`CheckRecord`]. The suites run at the sizes and
//! tolerances of the published acceptance criteria; `run_suite(All, ..)`
//! passing is the acceptance gate of the command-line tool.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::diffusion::{
    analytic_score, forward_marginal, log_explicit_constant, monotonicity_bound, reverse_integrate,
    verify_main_theorem, BoundReport, ReferenceLaw, SdeKind, SdeSpec,
};
use crate::error::Result;
use crate::measure::{
    distortion_gradient, project_to_grid, quadratic_distortion, voronoi_partition, DiscreteMeasure, Point,
    QuantizationGrid,
};
use crate::quantizer::{
    clvq, clvq_from_grid, empirical_distortion_trace, init_grid, lloyd_restarts, minibatch_kmeans, InitStrategy,
    LloydConfig, StepSchedule,
};
use crate::risk::{
    check_lipschitz_gap, gradient_discrepancy, Architecture, LipschitzSpec, LossMode, TinyClassifier, WeightedDataset,
};
use crate::sampler::Sampler;
use crate::scalar::{dot, sq_dist};
use crate::seed::{derive_seed, stream};
use crate::synthetic::{labelled_clusters, skewed_three_clusters, two_clusters_per_class};
use crate::transport::{compare_weighting, rate_scan, w2_discrete};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Distortion,
    Transport,
    Clvq,
    Diffusion,
    Risk,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["distortion", "transport", "clvq", "diffusion", "risk", "all"];
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "distortion" => Self::Distortion,
            "transport" => Self::Transport,
            "clvq" => Self::Clvq,
            "diffusion" => Self::Diffusion,
            "risk" => Self::Risk,
            "all" => Self::All,
            _ => return Err(format!("unknown suite `{s}`, expected one of {}", Self::NAMES.join(", "))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [Self::Distortion, Self::Transport, Self::Clvq, Self::Diffusion, Self::Risk, Self::All]
            .iter()
            .position(|s| s == self)
            .expect("listed");
        f.write_str(Self::NAMES[i])
    }
}

/// One verified property.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    /// Stable identifier, e.g. `transport.rate-law.d2`.
    pub claim: String,
    /// The property being checked, in words.
    pub property: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn record(claim: &str, property: &str, measured: f64, target: f64, tolerance: f64, pass: bool) -> CheckRecord {
    CheckRecord {
        claim: claim.into(),
        property: property.into(),
        measured,
        target,
        tolerance,
        pass,
    }
}

/// `measured <= target + tolerance`.
fn at_most(claim: &str, property: &str, measured: f64, target: f64, tolerance: f64) -> CheckRecord {
    record(claim, property, measured, target, tolerance, measured <= target + tolerance)
}

/// `|measured - target| <= tolerance`.
fn near(claim: &str, property: &str, measured: f64, target: f64, tolerance: f64) -> CheckRecord {
    record(claim, property, measured, target, tolerance, (measured - target).abs() <= tolerance)
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckRecord>> {
    Ok(match suite {
        Suite::Distortion => distortion_suite(seed)?,
        Suite::Transport => transport_suite(seed)?,
        Suite::Clvq => clvq_suite(seed)?,
        Suite::Diffusion => diffusion_suite(seed)?,
        Suite::Risk => risk_suite(seed)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in [Suite::Distortion, Suite::Transport, Suite::Clvq, Suite::Diffusion, Suite::Risk] {
                all.extend(run_suite(s, seed)?);
            }
            all
        }
    })
}

fn random_measure(rng: &mut impl Rng, n: usize, d: usize) -> Result<DiscreteMeasure<f64>> {
    DiscreteMeasure::normalized(
        d,
        (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        (0..n).map(|_| rng.random_range(0.05..1.0)).collect(),
    )
}

fn random_grid(rng: &mut impl Rng, k: usize, d: usize) -> Result<QuantizationGrid<f64>> {
    QuantizationGrid::from_flat(d, (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Largest relative gap `|G - W2(proj, mu)^2| / G` over 100 random pairs.
pub fn distortion_w2_equality(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let mut rng = stream(seed, i);
        let d = rng.random_range(1..=3);
        let n = rng.random_range(5..=50);
        let k = rng.random_range(1..=6);
        let mu = random_measure(&mut rng, n, d)?;
        let grid = random_grid(&mut rng, k, d)?;
        let g = quadratic_distortion(&mu, &grid)?;
        let (w, _) = w2_discrete(&project_to_grid(&mu, &grid)?, &mu)?;
        worst = worst.max((g - w * w).abs() / g.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Largest relative error `|grad - fd| / |grad|` over 50 random instances.
pub fn distortion_gradient_fd(seed: u64) -> Result<f64> {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let mut rng = stream(seed, i);
        let mu = random_measure(&mut rng, 30, 3)?;
        let grid = random_grid(&mut rng, 3, 3)?;
        let g: Vec<f64> = distortion_gradient(&mu, &grid)?.into_iter().flat_map(Point::into_vec).collect();
        let mut err = 0.0;
        for j in 0..g.len() {
            let mut plus = grid.flat().to_vec();
            plus[j] += h;
            let mut minus = grid.flat().to_vec();
            minus[j] -= h;
            let fd = (quadratic_distortion(&mu, &QuantizationGrid::from_flat(3, plus)?)?
                - quadratic_distortion(&mu, &QuantizationGrid::from_flat(3, minus)?)?)
                / (2.0 * h);
            err += (fd - g[j]).powi(2);
        }
        worst = worst.max(err.sqrt() / dot(&g, &g).sqrt().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

fn distortion_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut out = vec![
        at_most(
            "distortion.w2-equality",
            "G(x) equals W2(projection, mu)^2 on 100 random tie-free pairs (max relative gap)",
            distortion_w2_equality(derive_seed(seed, 1))?,
            0.0,
            1e-9,
        ),
        at_most(
            "distortion.gradient",
            "distortion gradient matches central differences on 50 instances (max relative error)",
            distortion_gradient_fd(derive_seed(seed, 2))?,
            0.0,
            1e-5,
        ),
    ];
    let s = Sampler::<f64>::uniform_cube(1)?;
    let mu = s.sample_measure(20_000, &mut stream(derive_seed(seed, 3), 0))?;
    for k in [1usize, 2, 4] {
        let res = lloyd_restarts(&mu, k, InitStrategy::DSquared, 5, derive_seed(seed, 4 + k as u64), LloydConfig::default())?;
        let exact = 1.0 / (12.0 * (k * k) as f64);
        out.push(near(
            &format!("distortion.uniform-closed-form.k{k}"),
            "Lloyd distortion of U[0,1] is within 10% of 1/(12 K^2) (relative)",
            res.distortion() / exact,
            1.0,
            0.1,
        ));
    }
    Ok(out)
}

/// `(violations of weighted <= uniform, reduction fractions)` on the skewed
/// three-cluster family over `seeds` seeds.
pub fn weighting_study(seed: u64, seeds: u64) -> Result<(usize, Vec<f64>)> {
    let spec = skewed_three_clusters();
    let mut violations = 0;
    let mut reductions = Vec::new();
    for s in 0..seeds {
        let sub = derive_seed(seed, s);
        let mu = DiscreteMeasure::uniform_flat(2, spec.sample(300, sub, 0)?)?;
        let q = lloyd_restarts(&mu, 3, InitStrategy::DSquared, 3, sub, LloydConfig::default())?;
        let c = compare_weighting(&mu, &q.grid)?;
        if c.weighted_w2 > c.uniform_w2 {
            violations += 1;
        }
        reductions.push(c.reduction_fraction);
    }
    Ok((violations, reductions))
}

fn transport_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut triangle = 0.0f64;
    let mut symmetry = 0.0f64;
    let mut marginals = 0.0f64;
    for i in 0..30u64 {
        let mut rng = stream(derive_seed(seed, 1), i);
        let d = rng.random_range(1..=3);
        let a = random_measure(&mut rng, 8, d)?;
        let b = random_measure(&mut rng, 6, d)?;
        let c = random_measure(&mut rng, 7, d)?;
        let (ab, plan) = w2_discrete(&a, &b)?;
        let (ba, _) = w2_discrete(&b, &a)?;
        let (bc, _) = w2_discrete(&b, &c)?;
        let (ac, _) = w2_discrete(&a, &c)?;
        triangle = triangle.max(ac - ab - bc);
        symmetry = symmetry.max((ab - ba).abs() / ab.max(f64::MIN_POSITIVE));
        marginals = marginals.max(plan.marginal_error(&a, &b));
    }
    let mut out = vec![
        at_most("transport.triangle", "W2 triangle inequality on 30 random triples (max excess)", triangle, 0.0, 1e-9),
        at_most("transport.symmetry", "W2(a,b) = W2(b,a) (max relative difference)", symmetry, 0.0, 1e-12),
        at_most("transport.marginals", "optimal plans match both marginals (max deviation)", marginals, 0.0, 1e-9),
    ];

    let mut beaten = 0usize;
    for i in 0..20u64 {
        let mut rng = stream(derive_seed(seed, 2), i);
        let mu = random_measure(&mut rng, 15, 2)?;
        let grid = random_grid(&mut rng, 4, 2)?;
        let best = w2_discrete(&project_to_grid(&mu, &grid)?, &mu)?.0;
        for _ in 0..100 {
            let raw = (0..4).map(|_| rng.random::<f64>() + 1e-3).collect();
            let nu = DiscreteMeasure::normalized(2, grid.flat().to_vec(), raw)?;
            if w2_discrete(&nu, &mu)?.0 < best - 1e-12 {
                beaten += 1;
            }
        }
    }
    out.push(at_most(
        "transport.fixed-grid-optimality",
        "no random weight vector on the grid beats the cell masses (count over 2000 draws)",
        beaten as f64,
        0.0,
        0.0,
    ));

    let (violations, reductions) = weighting_study(derive_seed(seed, 3), 10)?;
    out.push(at_most(
        "transport.weighted-vs-uniform",
        "cell-mass weights never lose to uniform weights in W2 (violations over 10 seeds)",
        violations as f64,
        0.0,
        0.0,
    ));
    let med = median(reductions);
    out.push(record(
        "transport.weighted-reduction",
        "median W2 reduction of cell-mass over uniform weights on the skewed family is at least 5%",
        med,
        0.05,
        0.0,
        med >= 0.05,
    ));

    for d in [1usize, 2] {
        let scan = rate_scan(
            &Sampler::uniform_cube(d)?,
            &[4, 8, 16, 32, 64],
            20_000,
            5,
            derive_seed(seed, 10 + d as u64),
            LloydConfig::default(),
        )?;
        let monotone = scan.errors.windows(2).all(|w| w[1] < w[0]);
        let target = -1.0 / d as f64;
        out.push(record(
            &format!("transport.rate-law.d{d}"),
            "log-log slope of the quantization error in K is -1/d, errors strictly decreasing",
            scan.fitted_slope,
            target,
            0.15,
            monotone && (scan.fitted_slope - target).abs() <= 0.15,
        ));
    }
    Ok(out)
}

/// The 0.7/0.3 mixture `N(-3, 0.1^2), N(3, 0.1^2)`.
pub fn companion_mixture() -> Result<Sampler<f64>> {
    Sampler::gaussian_mixture(
        vec![Point::new(vec![-3.0])?, Point::new(vec![3.0])?],
        vec![vec![0.01], vec![0.01]],
        vec![0.7, 0.3],
    )
}

/// Per seed: `(max |w - (0.7, 0.3)|, |trace - G_fresh| / G_fresh)`.
pub fn companion_study(seed: u64, seeds: u64) -> Result<Vec<(f64, f64)>> {
    let s = companion_mixture()?;
    let fresh = s.sample_measure(100_000, &mut stream(seed, u64::MAX))?;
    (0..seeds)
        .map(|i| {
            let run = clvq(&s, 2, StepSchedule::default(), 100_000, derive_seed(seed, i))?;
            let q = &run.quantization;
            let left = usize::from(q.grid.centroid(0)[0] >= 0.0);
            let werr = (q.weights[left] - 0.7).abs().max((q.weights[1 - left] - 0.3).abs());
            let g = quadratic_distortion(&fresh, &q.grid)?;
            let last = *empirical_distortion_trace(&run).last().expect("n_steps > 0");
            Ok((werr, (last - g).abs() / g))
        })
        .collect()
}

/// Number of coordinates and counts that differ between count-reciprocal
/// CLVQ and mini-batch k-means fed the same sample stream.
pub fn kmeans_equivalence_mismatches(seed: u64) -> Result<usize> {
    let mut mismatches = 0;
    for i in 0..5u64 {
        let sub = derive_seed(seed, i);
        let mut rng = stream(sub, 9);
        let data = random_measure(&mut rng, 200, 2)?;
        let km = minibatch_kmeans(&data, 5, 32, 20, sub)?;
        let grid = init_grid(&data, 5, InitStrategy::DSquared, &mut stream(sub, 0))?;
        let run = clvq_from_grid(&Sampler::empirical(data)?, grid, StepSchedule::CountReciprocal, 32 * 20, &mut stream(sub, 1))?;
        let q = run.quantization;
        mismatches += q.grid.flat().iter().zip(km.grid.flat()).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
        mismatches += q.counts.iter().zip(&km.counts).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    }
    Ok(mismatches)
}

fn clvq_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let study = companion_study(derive_seed(seed, 1), 10)?;
    let werr = median(study.iter().map(|s| s.0).collect());
    let terr = median(study.iter().map(|s| s.1).collect());
    Ok(vec![
        at_most(
            "clvq.companion-weights",
            "CLVQ companion weights approach the cell masses (0.7, 0.3) (median max error over 10 seeds)",
            werr,
            0.0,
            0.02,
        ),
        at_most(
            "clvq.distortion-trace",
            "moving average of winner distances tracks fresh-sample distortion (median relative gap)",
            terr,
            0.0,
            0.1,
        ),
        at_most(
            "clvq.kmeans-equivalence",
            "count-reciprocal CLVQ and mini-batch k-means agree bit for bit (mismatching values)",
            kmeans_equivalence_mismatches(derive_seed(seed, 2))? as f64,
            0.0,
            0.0,
        ),
    ])
}

/// Largest `<x-y, s(x)-s(y)> - k(t)|x-y|^2` over `pairs` random pairs at
/// times `ts`.
pub fn monotonicity_excess(kind: SdeKind, ts: &[f64], pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = stream(seed, 0);
    let base = random_measure(&mut rng, 5, 2)?;
    let reference = ReferenceLaw::new(base);
    let horizon = ts.iter().copied().fold(0.0, f64::max);
    let sde = SdeSpec::new(kind, horizon, horizon * 1e-3, 1)?;
    let mut worst = f64::NEG_INFINITY;
    for &t in ts {
        let k = monotonicity_bound(kind, t, reference.radius());
        for _ in 0..pairs {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let gx = analytic_score(&reference, &sde, t, &x)?;
            let gy = analytic_score(&reference, &sde, t, &y)?;
            let dg: Vec<f64> = gx.as_slice().iter().zip(gy.as_slice()).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            worst = worst.max(dot(&dx, &dg) - k * sq_dist(&x, &y));
        }
    }
    Ok(worst)
}

/// Adaptive Simpson quadrature to absolute tolerance `eps`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Largest relative error of the closed-form constant against quadrature
/// of its integrand, over `n` random `(R, delta, T)` per process.
pub fn explicit_constant_error(seed: u64, n: usize) -> Result<f64> {
    let mut rng = stream(seed, 0);
    let mut worst = 0.0f64;
    for kind in [SdeKind::Brownian, SdeKind::OrnsteinUhlenbeck] {
        for _ in 0..n {
            let r: f64 = rng.random_range(0.0..2.0);
            let t1: f64 = rng.random_range(0.5..3.0);
            let t0 = t1 * rng.random_range(0.1..0.9);
            let sde = SdeSpec::new(kind, t1, t0, 1)?;
            let integrand = move |t: f64| match kind {
                SdeKind::Brownian => r * r / (t * t) - 1.0 / t,
                SdeKind::OrnsteinUhlenbeck => {
                    let v = 1.0 - (-t).exp();
                    r * r * (-t).exp() / (v * v) - 1.0 / v
                }
            };
            let quad = adaptive_simpson(&integrand, t0, t1, 1e-14);
            let closed = log_explicit_constant(&sde, r)?;
            // relative error of C = exp(log C)
            worst = worst.max((closed - quad).exp_m1().abs());
        }
    }
    Ok(worst)
}

/// A documented configuration of the main bound check.
#[derive(Debug, Clone)]
pub struct TheoremConfig {
    pub name: &'static str,
    pub reference: ReferenceLaw<f64>,
    pub sde: SdeSpec<f64>,
    pub k: usize,
    pub f: LipschitzSpec<f64>,
    pub n_mc: usize,
}

/// 1D two-atom mixture (Brownian), 2D four-atom mixture (Brownian) and
/// 1D skewed three-atom mixture (Ornstein-Uhlenbeck).
pub fn theorem_configurations() -> Result<Vec<TheoremConfig>> {
    let two = DiscreteMeasure::uniform_flat(1, vec![-1.0, 1.0])?;
    let four = DiscreteMeasure::uniform_flat(2, vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0])?;
    let skewed = DiscreteMeasure::from_flat(1, vec![-1.0, 0.5, 2.0], vec![0.7, 0.2, 0.1])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(vec![
        TheoremConfig {
            name: "two-atom-1d",
            reference: ReferenceLaw::new(two),
            sde: SdeSpec::new(SdeKind::Brownian, 1.0, 0.25, 400)?,
            k: 8,
            f: LipschitzSpec::distance_to_point(Point::new(vec![0.3])?),
            n_mc: 5000,
        },
        TheoremConfig {
            name: "four-atom-2d",
            reference: ReferenceLaw::new(four),
            sde: SdeSpec::new(SdeKind::Brownian, 1.0, 0.2, 400)?,
            k: 16,
            f: LipschitzSpec::max_affine(
                vec![Point::new(vec![s, s])?, Point::new(vec![-s, s])?, Point::new(vec![0.0, -1.0])?],
                vec![0.0, 0.1, -0.2],
            )?,
            n_mc: 4000,
        },
        TheoremConfig {
            name: "skewed-1d",
            reference: ReferenceLaw::new(skewed),
            sde: SdeSpec::new(SdeKind::OrnsteinUhlenbeck, 1.0, 0.25, 400)?,
            k: 6,
            f: LipschitzSpec::distance_to_point(Point::new(vec![0.0])?),
            n_mc: 4000,
        },
    ])
}

pub fn run_theorem(config: &TheoremConfig, seed: u64) -> Result<BoundReport<f64>> {
    verify_main_theorem(&config.reference, &config.sde, config.k, &config.f, config.n_mc, seed)
}

/// Sample variance at `delta` of reverse paths started from exact draws
/// of `N(0, T)` under the score of `delta(0)`, and its allowed deviation
/// `5 se + 0.05 delta`.
pub fn marginal_consistency(seed: u64, n: usize, n_steps: usize) -> Result<(f64, f64)> {
    let origin = ReferenceLaw::new(DiscreteMeasure::dirac(Point::new(vec![0.0])?));
    let sde = SdeSpec::new(SdeKind::Brownian, 1.0, 0.1, n_steps)?;
    let start = forward_marginal(&origin, &sde, sde.horizon, n, derive_seed(seed, 0))?;
    let end = reverse_integrate(&start, &origin, &sde, derive_seed(seed, 1))?;
    let mean = end.coords().iter().sum::<f64>() / n as f64;
    let var = end.coords().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = sde.delta * (2.0 / (n - 1) as f64).sqrt();
    Ok((var, 5.0 * se + 0.05 * sde.delta))
}

fn diffusion_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let ts = [0.05, 0.5, 2.0];
    let mut out = vec![
        at_most(
            "diffusion.score-monotonicity.brownian",
            "score is one-sided Lipschitz with constant R^2/t^2 - 1/t (max excess over 3000 pairs)",
            monotonicity_excess(SdeKind::Brownian, &ts, 1000, derive_seed(seed, 1))?,
            0.0,
            1e-9,
        ),
        at_most(
            "diffusion.score-monotonicity.ou",
            "score is one-sided Lipschitz with constant R_t^2/v^2 - 1/v (max excess over 3000 pairs)",
            monotonicity_excess(SdeKind::OrnsteinUhlenbeck, &ts, 1000, derive_seed(seed, 2))?,
            0.0,
            1e-9,
        ),
        at_most(
            "diffusion.explicit-constant",
            "closed-form contraction constants match quadrature of their integrands (max relative error)",
            explicit_constant_error(derive_seed(seed, 3), 20)?,
            0.0,
            1e-10,
        ),
    ];
    for (i, config) in theorem_configurations()?.iter().enumerate() {
        let r = run_theorem(config, derive_seed(seed, 10 + i as u64))?;
        out.push(record(
            &format!("diffusion.main-bound.{}", config.name),
            "|E f(mu_delta) - E f(nu_delta)| <= C L W2(mu_T, nu_T) up to 3 standard errors",
            r.lhs,
            r.rhs,
            3.0 * r.mc_stderr,
            r.pass,
        ));
    }
    let (var, tol) = marginal_consistency(derive_seed(seed, 4), 20_000, 400)?;
    out.push(near(
        "diffusion.marginal-consistency",
        "reverse paths from exact N(0, T) draws end with variance delta = 0.1",
        var,
        0.1,
        tol,
    ));
    Ok(out)
}

/// Full, weighted-distilled and uniform-distilled datasets for one trial
/// on the two-cluster-per-class family. The distilled sets share a
/// four-point Lloyd grid; labels are cell majorities, empty cells dropped.
pub fn discrepancy_datasets(seed: u64) -> Result<[WeightedDataset<f64>; 3]> {
    let cloud = labelled_clusters::<f64>(&two_clusters_per_class(), 100, seed)?;
    let mu = cloud.measure()?;
    let grid = lloyd_restarts(&mu, 4, InitStrategy::DSquared, 3, seed, LloydConfig::default())?.grid;
    let part = voronoi_partition(&mu, &grid)?;
    let mut votes = vec![[0usize; 2]; grid.k()];
    for (&cell, &label) in part.assignment.iter().zip(&cloud.labels) {
        votes[cell][label] += 1;
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (j, v) in votes.iter().enumerate() {
        if part.cell_mass[j] > 0.0 {
            coords.extend_from_slice(grid.centroid(j));
            labels.push(usize::from(v[1] > v[0]));
            weights.push(part.cell_mass[j]);
        }
    }
    let full = WeightedDataset::unweighted(2, cloud.coords, cloud.labels)?;
    let weighted = WeightedDataset::from_flat(2, coords.clone(), labels.clone(), weights)?;
    let uniform = WeightedDataset::unweighted(2, coords, labels)?;
    Ok([full, weighted, uniform])
}

/// `(weighted, uniform)` gradient discrepancies at a seeded random
/// logistic-regression parameter.
pub fn discrepancy_trial(seed: u64) -> Result<(f64, f64)> {
    let [full, weighted, uniform] = discrepancy_datasets(seed)?;
    let model = TinyClassifier::new(Architecture::MultinomialLogistic, 2, 2, derive_seed(seed, 1))?;
    Ok((
        gradient_discrepancy(&model, &full, &weighted)?,
        gradient_discrepancy(&model, &full, &uniform)?,
    ))
}

fn risk_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut violations = 0usize;
    for i in 0..100u64 {
        let mut rng = stream(derive_seed(seed, 1), i);
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=40);
        let mu = random_measure(&mut rng, n, d)?;
        let k = rng.random_range(1..=5);
        let grid = random_grid(&mut rng, k, d)?;
        let a = Point::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect())?;
        let fs = [LipschitzSpec::distance_to_point(a), LipschitzSpec::constant(1.0)];
        violations += check_lipschitz_gap(&mu, &grid, &fs)?.iter().filter(|g| !g.pass).count();
    }
    let mut out = vec![at_most(
        "risk.lipschitz-gap",
        "|E_mu f - E_nu f| <= L sqrt(G) on 100 random triples (violations)",
        violations as f64,
        0.0,
        0.0,
    )];

    let mut rng = stream(derive_seed(seed, 2), 0);
    let data = WeightedDataset::<f64>::from_flat(
        3,
        (0..60).map(|_| rng.random_range(-2.0..2.0)).collect(),
        (0..20).map(|i| i % 3).collect(),
        (0..20).map(|_| rng.random_range(0.1..2.0)).collect(),
    )?;
    let mut worst = 0.0f64;
    for arch in [Architecture::MultinomialLogistic, Architecture::OneHiddenLayer { width: 4 }] {
        let model = TinyClassifier::<f64>::new(arch, 3, 3, derive_seed(seed, 3))?;
        let (_, g) = model.loss_gradient(&data, LossMode::Normalized)?;
        let h = 1e-6;
        for j in 0..g.len() {
            let mut plus = model.parameters().to_vec();
            plus[j] += h;
            let mut minus = model.parameters().to_vec();
            minus[j] -= h;
            let lp = TinyClassifier::with_parameters(arch, 3, 3, plus)?.loss(&data, LossMode::Normalized)?;
            let lm = TinyClassifier::with_parameters(arch, 3, 3, minus)?.loss(&data, LossMode::Normalized)?;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1e-3));
        }
    }
    out.push(at_most(
        "risk.classifier-gradient",
        "classifier gradient matches central differences (max relative error)",
        worst,
        0.0,
        1e-5,
    ));

    let wins = (0..10u64)
        .map(|i| discrepancy_trial(derive_seed(seed, 100 + i)))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .filter(|(w, u)| w <= u)
        .count();
    out.push(record(
        "risk.gradient-discrepancy",
        "weighted distillation gives a gradient no farther from the full gradient than uniform weights (wins of 10)",
        wins as f64,
        7.0,
        0.0,
        wins >= 7,
    ));
    Ok(out)
}
