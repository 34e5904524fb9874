//! Seeded synthetic latent clouds with documented generating parameters.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::scalar::Real;
use crate::seed;

/// Isotropic Gaussian clusters with fixed mass fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub centers: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    pub spread: f64,
}

impl ClusterSpec {
    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    /// Points per cluster: `floor(m_c n)`, the remainder going to the
    /// clusters in index order.
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let mut counts: Vec<usize> = self.masses.iter().map(|m| (m * n as f64).floor() as usize).collect();
        let k = counts.len();
        let rest = n - counts.iter().sum::<usize>();
        for i in 0..rest {
            counts[i % k] += 1;
        }
        counts
    }

    /// `n` points, cluster by cluster, drawn from stream `stream_id` of `seed`.
    pub fn sample<T: Real>(&self, n: usize, seed: u64, stream_id: u64) -> Result<Vec<T>> {
        if self.centers.is_empty() || self.centers.len() != self.masses.len() {
            return Err(Error::InvalidSpec("one mass per cluster centre is required".into()));
        }
        let mut rng = seed::stream(seed, stream_id);
        let mut coords = Vec::with_capacity(n * self.dim());
        for (center, count) in self.centers.iter().zip(self.counts(n)) {
            for _ in 0..count {
                for &c in center {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    coords.push(T::of(c + self.spread * z));
                }
            }
        }
        Ok(coords)
    }
}

/// Points with class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledCloud<T> {
    pub dim: usize,
    pub coords: Vec<T>,
    pub labels: Vec<usize>,
}

impl<T: Real> LabelledCloud<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn measure(&self) -> Result<DiscreteMeasure<T>> {
        DiscreteMeasure::uniform_flat(self.dim, self.coords.clone())
    }

    /// Uniform measure on the points of class `label`.
    pub fn class_measure(&self, label: usize) -> Result<DiscreteMeasure<T>> {
        let coords: Vec<T> = self
            .coords
            .chunks_exact(self.dim)
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .flat_map(|(row, _)| row.iter().copied())
            .collect();
        DiscreteMeasure::uniform_flat(self.dim, coords)
    }
}

/// Class `c` drawn from `classes[c]` on stream `c` of `seed`.
pub fn labelled_clusters<T: Real>(classes: &[ClusterSpec], n_per_class: usize, seed: u64) -> Result<LabelledCloud<T>> {
    let dim = classes.first().map_or(0, ClusterSpec::dim);
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (c, spec) in classes.iter().enumerate() {
        if spec.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: spec.dim(),
            });
        }
        coords.extend(spec.sample::<T>(n_per_class, seed, c as u64)?);
        labels.extend(std::iter::repeat_n(c, n_per_class));
    }
    Ok(LabelledCloud { dim, coords, labels })
}

/// Three planar clusters holding 70%, 20% and 10% of the mass, centred at
/// `(0,0)`, `(10,0)`, `(0,10)` with standard deviation `0.5`.
pub fn skewed_three_clusters() -> ClusterSpec {
    ClusterSpec {
        centers: vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]],
        masses: vec![0.7, 0.2, 0.1],
        spread: 0.5,
    }
}

/// Two classes in the plane, each an 80/20 pair of clusters with standard
/// deviation `0.3`: class 0 at `(-2,0)` and `(0,2)`, class 1 at `(2,0)` and
/// `(0,-2)`.
pub fn two_clusters_per_class() -> [ClusterSpec; 2] {
    [
        ClusterSpec {
            centers: vec![vec![-2.0, 0.0], vec![0.0, 2.0]],
            masses: vec![0.8, 0.2],
            spread: 0.3,
        },
        ClusterSpec {
            centers: vec![vec![2.0, 0.0], vec![0.0, -2.0]],
            masses: vec![0.8, 0.2],
            spread: 0.3,
        },
    ]
}

/// Demo latents: three linearly separable classes in the plane. Class `c`
/// is a 70/30 pair of clusters at radius 4 and angle `2 pi c / 3`, offset
/// by `+-0.6` along the tangent, with standard deviation `0.35`.
pub fn demo_classes() -> Vec<ClusterSpec> {
    (0..3)
        .map(|c| {
            let a = std::f64::consts::TAU * c as f64 / 3.0;
            let (s, co) = a.sin_cos();
            let center = [4.0 * co, 4.0 * s];
            let tangent = [-s, co];
            ClusterSpec {
                centers: vec![
                    vec![center[0] + 0.6 * tangent[0], center[1] + 0.6 * tangent[1]],
                    vec![center[0] - 0.6 * tangent[0], center[1] - 0.6 * tangent[1]],
                ],
                masses: vec![0.7, 0.3],
                spread: 0.35,
            }
        })
        .collect()
}

pub const DEMO_SEED: u64 = 20_240_531;
pub const DEMO_POINTS_PER_CLASS: usize = 60;

/// The bundled demo dataset.
pub fn demo_dataset() -> LabelledCloud<f64> {
    labelled_clusters(&demo_classes(), DEMO_POINTS_PER_CLASS, DEMO_SEED).expect("demo parameters are valid")
}

/// Held-out draws from the demo classes under `derive_seed(DEMO_SEED, 1)`.
pub fn demo_eval_dataset() -> LabelledCloud<f64> {
    labelled_clusters(&demo_classes(), DEMO_POINTS_PER_CLASS, seed::derive_seed(DEMO_SEED, 1))
        .expect("demo parameters are valid")
}
