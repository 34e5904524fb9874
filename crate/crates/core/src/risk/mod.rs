//! Weighted expectations of Lipschitz test functions and the weighted-loss
//! training step.

mod classifier;

pub use classifier::{
    gradient_discrepancy, train_weighted, Architecture, LossMode, TinyClassifier, TrainConfig, TrainReport,
    WeightedDataset,
};

use crate::error::{check_dim, Error, Result};
use crate::measure::{project_to_grid, quadratic_distortion, DiscreteMeasure, Point, QuantizationGrid};
use crate::scalar::{dot, norm, sq_dist, Real};

/// Test function with a known Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub enum LipschitzSpec<T> {
    /// `|x - a|`, 1-Lipschitz.
    DistanceToPoint(Point<T>),
    /// `max_k <s_k, x> + b_k` with unit slopes, 1-Lipschitz.
    MaxAffine { slopes: Vec<Point<T>>, offsets: Vec<T> },
    /// 0-Lipschitz.
    Constant(T),
}

impl<T: Real> LipschitzSpec<T> {
    pub fn distance_to_point(a: Point<T>) -> Self {
        Self::DistanceToPoint(a)
    }

    /// Slopes must share a dimension and have unit norm within `1e-9`.
    pub fn max_affine(slopes: Vec<Point<T>>, offsets: Vec<T>) -> Result<Self> {
        if slopes.is_empty() || slopes.len() != offsets.len() {
            return Err(Error::InvalidSpec("max-affine needs one offset per slope".into()));
        }
        let d = slopes[0].dim();
        for s in &slopes {
            check_dim(d, s.dim())?;
            if (s.norm() - T::one()).abs() > T::of(1e-9) {
                return Err(Error::InvalidSpec("max-affine slopes must have unit norm".into()));
            }
        }
        if let Some(i) = offsets.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self::MaxAffine { slopes, offsets })
    }

    pub fn constant(c: T) -> Self {
        Self::Constant(c)
    }

    /// Declared Lipschitz constant.
    pub fn lipschitz(&self) -> T {
        match self {
            Self::Constant(_) => T::zero(),
            _ => T::one(),
        }
    }

    /// Input dimension, `None` for constants.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::DistanceToPoint(a) => Some(a.dim()),
            Self::MaxAffine { slopes, .. } => Some(slopes[0].dim()),
            Self::Constant(_) => None,
        }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self {
            Self::DistanceToPoint(a) => sq_dist(x, a.as_slice()).sqrt(),
            Self::MaxAffine { slopes, offsets } => slopes
                .iter()
                .zip(offsets)
                .map(|(s, &b)| dot(s.as_slice(), x) + b)
                .fold(T::neg_infinity(), T::max),
            Self::Constant(c) => *c,
        }
    }

    pub(crate) fn check_input_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(expected) => check_dim(expected, d),
            None => Ok(()),
        }
    }
}

/// `sum_i w_i f(a_i)`.
pub fn weighted_expectation<T: Real>(f: &LipschitzSpec<T>, nu: &DiscreteMeasure<T>) -> Result<T> {
    f.check_input_dim(nu.dim())?;
    Ok(nu.atoms().zip(nu.weights()).map(|(a, &w)| w * f.eval(a)).sum())
}

/// One test function's side of `|E_mu f - E_nu f| <= L sqrt(G)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport<T> {
    pub gap: T,
    pub bound: T,
    /// `bound - gap`; negative on a violation.
    pub slack: T,
    pub pass: bool,
}

/// Compares `mu` with its projection on `grid` under every test function.
/// A check passes when the gap is within `1e-9` of the bound.
pub fn check_lipschitz_gap<T: Real>(
    mu: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
    fs: &[LipschitzSpec<T>],
) -> Result<Vec<GapReport<T>>> {
    let nu = project_to_grid(mu, grid)?;
    let root_g = quadratic_distortion(mu, grid)?.sqrt();
    fs.iter()
        .map(|f| {
            let gap = (weighted_expectation(f, mu)? - weighted_expectation(f, &nu)?).abs();
            let bound = f.lipschitz() * root_g;
            Ok(GapReport {
                gap,
                bound,
                slack: bound - gap,
                pass: gap <= bound + T::of(1e-9),
            })
        })
        .collect()
}

/// Largest `|f(x) - f(y)| / |x - y|` over the given pairs.
pub fn empirical_lipschitz<T: Real>(f: &LipschitzSpec<T>, pairs: &[(Vec<T>, Vec<T>)]) -> T {
    pairs
        .iter()
        .filter_map(|(x, y)| {
            let d = sq_dist(x, y).sqrt();
            (d > T::zero()).then(|| (f.eval(x) - f.eval(y)).abs() / d)
        })
        .fold(T::zero(), T::max)
}

/// `v / |v|`, `None` for the zero vector.
pub fn unit_vector<T: Real>(v: Vec<T>) -> Option<Point<T>> {
    let n = norm(&v);
    (n > T::zero()).then(|| Point::from_vec_unchecked(v.into_iter().map(|c| c / n).collect()))
}
