//! Discrete probability measures, quantization grids, Voronoi geometry and
//! the quadratic distortion functional.
//!
//! Nearest-centroid ties always resolve to the lowest index, so cell
//! membership of an atom sitting exactly on a Voronoi boundary is
//! deterministic. All reductions run in index-ascending order.

use crate::error::{check_dim, Error, Result};
use crate::scalar::{norm, sq_dist, Real};

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(Vec<T>);

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(coords))
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn norm(&self) -> T {
        norm(&self.0)
    }
}

impl<T> AsRef<[T]> for Point<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

impl<T: Real> TryFrom<Vec<T>> for Point<T> {
    type Error = Error;

    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

fn check_coords<T: Real>(coords: &[T]) -> Result<()> {
    match coords.iter().position(|c| !c.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn flatten<T: Real>(points: Vec<Point<T>>) -> Result<(usize, Vec<T>)> {
    let dim = points.first().map(Point::dim).unwrap_or(0);
    let mut flat = Vec::with_capacity(points.len() * dim);
    for p in points {
        check_dim(dim, p.dim())?;
        flat.extend(p.0);
    }
    Ok((dim, flat))
}

/// Weighted point cloud `sum_i w_i delta(a_i)` with atoms stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    dim: usize,
    coords: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(atoms: Vec<Point<T>>, weights: Vec<T>) -> Result<Self> {
        let (dim, coords) = flatten(atoms)?;
        Self::from_flat(dim, coords, weights)
    }

    /// Builds a measure from row-major coordinates; weights must lie in
    /// `[0, 1]` and sum to one.
    pub fn from_flat(dim: usize, coords: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("measure has no atoms".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not form {} atoms of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        check_coords(&coords)?;
        if let Some(i) = weights
            .iter()
            .position(|w| !w.is_finite() || *w < T::zero() || *w > T::one())
        {
            return Err(Error::InvalidMeasure(format!("weight {i} is outside [0, 1]")));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::mass_tolerance(weights.len()) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { dim, coords, weights })
    }

    /// Rescales nonnegative `raw` weights to unit mass.
    pub fn normalized(dim: usize, coords: Vec<T>, raw: Vec<T>) -> Result<Self> {
        let total: T = raw.iter().copied().sum();
        if !(total > T::zero()) || raw.iter().any(|w| *w < T::zero()) {
            return Err(Error::InvalidMeasure("raw weights must be nonnegative with positive sum".into()));
        }
        let weights = raw.into_iter().map(|w| w / total).collect();
        Self::from_flat(dim, coords, weights)
    }

    pub fn uniform(atoms: Vec<Point<T>>) -> Result<Self> {
        let (dim, coords) = flatten(atoms)?;
        Self::uniform_flat(dim, coords)
    }

    pub fn uniform_flat(dim: usize, coords: Vec<T>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure("coordinates do not form whole atoms".into()));
        }
        let n = coords.len() / dim;
        let w = T::one() / T::of_usize(n);
        Self::from_flat(dim, coords, vec![w; n])
    }

    /// Single Dirac mass.
    pub fn dirac(at: Point<T>) -> Self {
        Self {
            dim: at.dim(),
            coords: at.0,
            weights: vec![T::one()],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    /// Largest atom norm, i.e. the radius of the smallest origin-centred
    /// ball containing the support.
    pub fn support_radius(&self) -> T {
        self.atoms().map(norm).fold(T::zero(), T::max)
    }

    pub fn mean(&self) -> Point<T> {
        let mut m = vec![T::zero(); self.dim];
        for (a, &w) in self.atoms().zip(&self.weights) {
            for (mj, &aj) in m.iter_mut().zip(a) {
                *mj += w * aj;
            }
        }
        Point(m)
    }

    /// Same weights, every coordinate multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.iter().map(|&c| c * s).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Number of pairwise-distinct atoms carrying positive weight.
    pub fn distinct_support_len(&self) -> usize {
        distinct_rows(self.dim, self.atoms().zip(&self.weights).filter(|(_, w)| **w > T::zero()).map(|(a, _)| a)).len()
    }
}

/// First occurrence of each distinct row, in input order.
pub(crate) fn distinct_rows<'a, T: Real>(dim: usize, rows: impl Iterator<Item = &'a [T]>) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rows {
        debug_assert_eq!(row.len(), dim);
        // +0.0 and -0.0 are the same point.
        let key: Vec<u64> = row.iter().map(|c| (*c + T::zero()).as_f64().to_bits()).collect();
        if seen.insert(key) {
            out.push(row.to_vec());
        }
    }
    out
}

/// `K` pairwise-distinct centroids of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationGrid<T> {
    dim: usize,
    centroids: Vec<T>,
}

impl<T: Real> QuantizationGrid<T> {
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        let (dim, flat) = flatten(points)?;
        Self::from_flat(dim, flat)
    }

    pub fn from_flat(dim: usize, centroids: Vec<T>) -> Result<Self> {
        if dim == 0 || centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(Error::InvalidGrid("grid needs at least one centroid of positive dimension".into()));
        }
        check_coords(&centroids)?;
        let grid = Self { dim, centroids };
        for i in 0..grid.k() {
            for j in 0..i {
                if sq_dist(grid.centroid(i), grid.centroid(j)) == T::zero() {
                    return Err(Error::InvalidGrid(format!("centroids {j} and {i} coincide")));
                }
            }
        }
        Ok(grid)
    }

    pub(crate) fn from_flat_unchecked(dim: usize, centroids: Vec<T>) -> Self {
        Self { dim, centroids }
    }

    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, i: usize) -> &[T] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn centroid_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.centroids.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[T] {
        &self.centroids
    }

    pub fn points(&self) -> Vec<Point<T>> {
        self.centroids().map(|c| Point(c.to_vec())).collect()
    }

    /// Grid with one more centroid appended at the end.
    pub fn with_appended(&self, p: &[T]) -> Result<Self> {
        check_dim(self.dim, p.len())?;
        let mut flat = self.centroids.clone();
        flat.extend_from_slice(p);
        Self::from_flat(self.dim, flat)
    }

    /// Uniform-weight measure on the centroids.
    pub fn uniform_measure(&self) -> DiscreteMeasure<T> {
        let w = T::one() / T::of_usize(self.k());
        DiscreteMeasure {
            dim: self.dim,
            coords: self.centroids.clone(),
            weights: vec![w; self.k()],
        }
    }

    /// Measure on the centroids with the given weights.
    pub fn measure_with(&self, weights: Vec<T>) -> Result<DiscreteMeasure<T>> {
        DiscreteMeasure::from_flat(self.dim, self.centroids.clone(), weights)
    }
}

/// Nearest centroid and its squared distance, without dimension checks.
#[inline]
pub(crate) fn nearest<T: Real>(p: &[T], grid: &QuantizationGrid<T>) -> (usize, T) {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (j, c) in grid.centroids().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Smallest index attaining `min_j |p - x_j|`.
pub fn nearest_index<T: Real>(p: &[T], grid: &QuantizationGrid<T>) -> Result<usize> {
    check_dim(grid.dim(), p.len())?;
    Ok(nearest(p, grid).0)
}

/// Voronoi cell membership of every atom with per-cell mass and centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiPartition<T> {
    pub assignment: Vec<usize>,
    pub cell_mass: Vec<T>,
    pub cell_centroid: Vec<Option<Point<T>>>,
}

impl<T: Real> VoronoiPartition<T> {
    pub fn empty_cells(&self) -> Vec<usize> {
        self.cell_mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == T::zero())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn voronoi_partition<T: Real>(
    mu: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
) -> Result<VoronoiPartition<T>> {
    check_dim(grid.dim(), mu.dim())?;
    let k = grid.k();
    let d = grid.dim();
    let mut assignment = Vec::with_capacity(mu.len());
    let mut cell_mass = vec![T::zero(); k];
    let mut sums = vec![T::zero(); k * d];
    for (a, &w) in mu.atoms().zip(mu.weights()) {
        let (j, _) = nearest(a, grid);
        assignment.push(j);
        cell_mass[j] += w;
        for (s, &x) in sums[j * d..(j + 1) * d].iter_mut().zip(a) {
            *s += w * x;
        }
    }
    let cell_centroid = (0..k)
        .map(|j| {
            (cell_mass[j] > T::zero())
                .then(|| Point(sums[j * d..(j + 1) * d].iter().map(|&s| s / cell_mass[j]).collect()))
        })
        .collect();
    // a summed cell mass can exceed the unit total by rounding
    for m in &mut cell_mass {
        *m = m.min(T::one());
    }
    Ok(VoronoiPartition {
        assignment,
        cell_mass,
        cell_centroid,
    })
}

/// `sum_i w_i min_j |a_i - x_j|^2`.
pub fn quadratic_distortion<T: Real>(mu: &DiscreteMeasure<T>, grid: &QuantizationGrid<T>) -> Result<T> {
    check_dim(grid.dim(), mu.dim())?;
    let mut acc = T::zero();
    for (a, &w) in mu.atoms().zip(mu.weights()) {
        acc += w * nearest(a, grid).1;
    }
    Ok(acc)
}

/// Gradient of the distortion: component `i` is `2 sum_{a in C_i} w (x_i - a)`.
pub fn distortion_gradient<T: Real>(
    mu: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
) -> Result<Vec<Point<T>>> {
    check_dim(grid.dim(), mu.dim())?;
    let d = grid.dim();
    let mut grad = vec![T::zero(); grid.k() * d];
    for (a, &w) in mu.atoms().zip(mu.weights()) {
        let (j, _) = nearest(a, grid);
        let x = grid.centroid(j);
        for ((g, &xj), &aj) in grad[j * d..(j + 1) * d].iter_mut().zip(x).zip(a) {
            *g += w * (xj - aj);
        }
    }
    let two = T::of(2.0);
    Ok(grad.chunks_exact(d).map(|g| Point(g.iter().map(|&v| two * v).collect())).collect())
}

/// Push-forward of `mu` under nearest-centroid projection:
/// `sum_i mu(C_i) delta(x_i)`. Empty cells keep their centroid with weight 0.
pub fn project_to_grid<T: Real>(
    mu: &DiscreteMeasure<T>,
    grid: &QuantizationGrid<T>,
) -> Result<DiscreteMeasure<T>> {
    let part = voronoi_partition(mu, grid)?;
    Ok(DiscreteMeasure {
        dim: grid.dim(),
        coords: grid.flat().to_vec(),
        weights: part.cell_mass,
    })
}
