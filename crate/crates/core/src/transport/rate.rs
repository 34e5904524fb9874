use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::quantizer::{extend_grid_farthest, lloyd, lloyd_restarts, InitStrategy, LloydConfig, LloydResult};
use crate::sampler::Sampler;
use crate::scalar::Real;
use crate::seed;

/// Quantization error `e_K = sqrt(G(x_K))` across levels and the fitted
/// log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct RateScan<T> {
    pub levels: Vec<usize>,
    pub errors: Vec<T>,
    pub fitted_slope: T,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidSpec("slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > T::zero())) {
        return Err(Error::InvalidSpec("slope fit needs positive values".into()));
    }
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let n = T::of_usize(lx.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (*x - mx) * (*y - my);
        sxx += (*x - mx) * (*x - mx);
    }
    if sxx == T::zero() {
        return Err(Error::InvalidSpec("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Lloyd quantizers of `mu` at every level in `ks`.
///
/// Each level keeps the best of `restarts` D^2-seeded runs and one run
/// started from the previous level's grid extended by farthest atoms, so
/// distortion never increases with `K`.
pub fn quantizer_ladder<T: Real>(
    mu: &DiscreteMeasure<T>,
    ks: &[usize],
    restarts: usize,
    seed: u64,
    config: LloydConfig<T>,
) -> Result<Vec<LloydResult<T>>> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec("levels must be positive and strictly increasing".into()));
    }
    let mut ladder: Vec<LloydResult<T>> = Vec::with_capacity(ks.len());
    for (level, &k) in ks.iter().enumerate() {
        let mut best = lloyd_restarts(mu, k, InitStrategy::DSquared, restarts, seed::derive_seed(seed, level as u64), config)?;
        if let Some(prev) = ladder.last() {
            let chained = lloyd(mu, &extend_grid_farthest(mu, &prev.grid, k)?, config)?;
            if chained.distortion() < best.distortion() {
                best = chained;
            }
        }
        ladder.push(best);
    }
    Ok(ladder)
}

/// Quantization errors of `n_samples` draws from `sampler` at every level
/// in `ks`, from [`quantizer_ladder`].
pub fn rate_scan<T: Real>(
    sampler: &Sampler<T>,
    ks: &[usize],
    n_samples: usize,
    restarts: usize,
    seed: u64,
    config: LloydConfig<T>,
) -> Result<RateScan<T>> {
    let mu = sampler.sample_measure(n_samples, &mut seed::stream(seed, 0))?;
    let ladder = quantizer_ladder(&mu, ks, restarts, seed::derive_seed(seed, 1), config)?;
    let errors: Vec<T> = ladder.iter().map(|r| r.distortion().sqrt()).collect();
    let levels: Vec<T> = ks.iter().map(|&k| T::of_usize(k)).collect();
    let fitted_slope = if ks.len() >= 2 { log_log_slope(&levels, &errors)? } else { T::nan() };
    Ok(RateScan {
        levels: ks.to_vec(),
        errors,
        fitted_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn uniform_interval_rate() {
        let s = Sampler::<f64>::uniform_cube(1).unwrap();
        let scan = rate_scan(&s, &[2, 4, 8, 16], 4_000, 2, 7, LloydConfig::default()).unwrap();
        assert!(scan.errors.windows(2).all(|w| w[1] < w[0]), "{:?}", scan.errors);
        assert!((scan.fitted_slope + 1.0).abs() < 0.15, "{}", scan.fitted_slope);
    }

    #[test]
    fn rejects_unsorted_levels() {
        let s = Sampler::<f64>::uniform_cube(1).unwrap();
        assert!(rate_scan(&s, &[4, 2], 100, 1, 0, LloydConfig::default()).is_err());
    }
}
