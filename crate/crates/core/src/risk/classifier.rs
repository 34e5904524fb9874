use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::measure::Point;
use crate::scalar::{log_sum_exp, Real};
use crate::seed;

/// Labelled points with positive per-sample loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset<T> {
    dim: usize,
    coords: Vec<T>,
    labels: Vec<usize>,
    weights: Vec<T>,
    n_classes: usize,
}

impl<T: Real> WeightedDataset<T> {
    pub fn new(points: Vec<Point<T>>, labels: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        let dim = points.first().map(Point::dim).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_dim(dim, p.dim())?;
            coords.extend(p.into_vec());
        }
        Self::from_flat(dim, coords, labels, weights)
    }

    pub fn from_flat(dim: usize, coords: Vec<T>, labels: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        if labels.is_empty() || dim == 0 {
            return Err(Error::InvalidSpec("dataset needs at least one point of positive dimension".into()));
        }
        if coords.len() != labels.len() * dim || weights.len() != labels.len() {
            return Err(Error::InvalidSpec("points, labels and weights differ in length".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(Error::InvalidSpec("dataset weights must be positive and finite".into()));
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            dim,
            coords,
            labels,
            weights,
            n_classes,
        })
    }

    /// Every weight equal to one.
    pub fn unweighted(dim: usize, coords: Vec<T>, labels: Vec<usize>) -> Result<Self> {
        let n = labels.len();
        Self::from_flat(dim, coords, labels, vec![T::one(); n])
    }

    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::from_flat(self.dim, self.coords.clone(), self.labels.clone(), weights)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One more than the largest label.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    MultinomialLogistic,
    OneHiddenLayer { width: usize },
}

impl Architecture {
    /// `C d + C` for logistic regression, `h d + h + C h + C` with a tanh
    /// hidden layer of width `h`.
    pub fn param_count(self, dim: usize, n_classes: usize) -> usize {
        match self {
            Self::MultinomialLogistic => n_classes * dim + n_classes,
            Self::OneHiddenLayer { width } => width * dim + width + n_classes * width + n_classes,
        }
    }
}

/// How per-sample losses are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// `sum w l / sum w`.
    #[default]
    Normalized,
    /// `sum w l`.
    RawSum,
}

/// Softmax classifier with a flat parameter vector.
///
/// Layout: logistic `[W (C x d), b (C)]`; hidden layer
/// `[W1 (h x d), b1 (h), W2 (C x h), b2 (C)]`, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyClassifier<T> {
    arch: Architecture,
    dim: usize,
    n_classes: usize,
    theta: Vec<T>,
}

impl<T: Real> TinyClassifier<T> {
    /// Weights drawn as `N(0, 1/fan_in)` from `seed`, biases zero.
    pub fn new(arch: Architecture, dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        Self::check_shape(arch, dim, n_classes)?;
        let mut rng = seed::stream(seed, 0);
        let mut gauss = |fan_in: usize, n: usize| -> Vec<T> {
            let s = 1.0 / (fan_in as f64).sqrt();
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::of(s * z)
                })
                .collect()
        };
        let mut theta = Vec::with_capacity(arch.param_count(dim, n_classes));
        match arch {
            Architecture::MultinomialLogistic => {
                theta.extend(gauss(dim, n_classes * dim));
                theta.extend(vec![T::zero(); n_classes]);
            }
            Architecture::OneHiddenLayer { width } => {
                theta.extend(gauss(dim, width * dim));
                theta.extend(vec![T::zero(); width]);
                theta.extend(gauss(width, n_classes * width));
                theta.extend(vec![T::zero(); n_classes]);
            }
        }
        Ok(Self {
            arch,
            dim,
            n_classes,
            theta,
        })
    }

    pub fn with_parameters(arch: Architecture, dim: usize, n_classes: usize, theta: Vec<T>) -> Result<Self> {
        Self::check_shape(arch, dim, n_classes)?;
        let expected = arch.param_count(dim, n_classes);
        if theta.len() != expected {
            return Err(Error::InvalidSpec(format!(
                "expected {expected} parameters, found {}",
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            arch,
            dim,
            n_classes,
            theta,
        })
    }

    fn check_shape(arch: Architecture, dim: usize, n_classes: usize) -> Result<()> {
        if dim == 0 || n_classes < 2 || matches!(arch, Architecture::OneHiddenLayer { width: 0 }) {
            return Err(Error::InvalidSpec("classifier needs d >= 1, C >= 2 and a nonzero width".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn parameters(&self) -> &[T] {
        &self.theta
    }

    pub fn set_parameters(&mut self, theta: Vec<T>) -> Result<()> {
        *self = Self::with_parameters(self.arch, self.dim, self.n_classes, theta)?;
        Ok(())
    }

    fn affine(w: &[T], b: &[T], x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(b.iter().zip(w.chunks_exact(x.len())).map(|(&bi, row)| {
            bi + row.iter().zip(x).map(|(&a, &c)| a * c).sum::<T>()
        }));
    }

    /// Hidden activations (empty for logistic regression) and logits.
    fn forward(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let (d, c) = (self.dim, self.n_classes);
        let mut hidden = Vec::new();
        let mut logits = Vec::with_capacity(c);
        match self.arch {
            Architecture::MultinomialLogistic => {
                Self::affine(&self.theta[..c * d], &self.theta[c * d..], x, &mut logits);
            }
            Architecture::OneHiddenLayer { width: h } => {
                let (w1, rest) = self.theta.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                Self::affine(w1, b1, x, &mut hidden);
                for v in &mut hidden {
                    *v = v.tanh();
                }
                Self::affine(w2, b2, &hidden, &mut logits);
            }
        }
        (hidden, logits)
    }

    pub fn logits(&self, x: &[T]) -> Vec<T> {
        self.forward(x).1
    }

    pub fn probabilities(&self, x: &[T]) -> Vec<T> {
        let z = self.logits(x);
        let lse = log_sum_exp(&z);
        z.iter().map(|&v| (v - lse).exp()).collect()
    }

    /// Most probable class, lowest index on ties.
    pub fn predict(&self, x: &[T]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (i, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = i;
            }
        }
        best
    }

    /// Cross-entropy `-log p_y(x)` and its gradient in the parameters.
    pub fn sample_loss_gradient(&self, x: &[T], y: usize) -> (T, Vec<T>) {
        let mut g = vec![T::zero(); self.theta.len()];
        let loss = self.sample_backward(x, y, &mut g);
        (loss, g)
    }

    fn sample_backward(&self, x: &[T], y: usize, g: &mut [T]) -> T {
        let (d, c) = (self.dim, self.n_classes);
        let (hidden, z) = self.forward(x);
        let lse = log_sum_exp(&z);
        let loss = lse - z[y];
        let dz: Vec<T> = z
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - lse).exp() - if k == y { T::one() } else { T::zero() })
            .collect();
        match self.arch {
            Architecture::MultinomialLogistic => {
                let (gw, gb) = g.split_at_mut(c * d);
                for k in 0..c {
                    for (gj, &xj) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *gj = dz[k] * xj;
                    }
                    gb[k] = dz[k];
                }
            }
            Architecture::OneHiddenLayer { width: h } => {
                let w2 = &self.theta[h * d + h..h * d + h + c * h];
                let (gw1, rest) = g.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(c * h);
                for k in 0..c {
                    for (gj, &hj) in gw2[k * h..(k + 1) * h].iter_mut().zip(&hidden) {
                        *gj = dz[k] * hj;
                    }
                    gb2[k] = dz[k];
                }
                for j in 0..h {
                    let back: T = (0..c).map(|k| w2[k * h + j] * dz[k]).sum();
                    let da = back * (T::one() - hidden[j] * hidden[j]);
                    for (gi, &xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *gi = da * xi;
                    }
                    gb1[j] = da;
                }
            }
        }
        loss
    }

    fn check_data(&self, data: &WeightedDataset<T>) -> Result<()> {
        check_dim(self.dim, data.dim())?;
        if data.n_classes() > self.n_classes {
            return Err(Error::InvalidSpec(format!(
                "label {} exceeds the classifier's {} classes",
                data.n_classes() - 1,
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Weighted cross-entropy and its gradient, samples summed in index order.
    pub fn loss_gradient(&self, data: &WeightedDataset<T>, mode: LossMode) -> Result<(T, Vec<T>)> {
        self.check_data(data)?;
        let mut total = T::zero();
        let mut grad = vec![T::zero(); self.theta.len()];
        let mut g = vec![T::zero(); self.theta.len()];
        for i in 0..data.len() {
            let w = data.weights()[i];
            total += w * self.sample_backward(data.point(i), data.labels()[i], &mut g);
            for (acc, &gj) in grad.iter_mut().zip(&g) {
                *acc += w * gj;
            }
        }
        if mode == LossMode::Normalized {
            let sw = data.total_weight();
            total /= sw;
            for v in &mut grad {
                *v /= sw;
            }
        }
        Ok((total, grad))
    }

    pub fn loss(&self, data: &WeightedDataset<T>, mode: LossMode) -> Result<T> {
        self.check_data(data)?;
        let mut total = T::zero();
        for i in 0..data.len() {
            let z = self.logits(data.point(i));
            total += data.weights()[i] * (log_sum_exp(&z) - z[data.labels()[i]]);
        }
        Ok(match mode {
            LossMode::Normalized => total / data.total_weight(),
            LossMode::RawSum => total,
        })
    }

    /// Unweighted fraction of correctly classified points.
    pub fn accuracy(&self, data: &WeightedDataset<T>) -> Result<T> {
        self.check_data(data)?;
        let hits = (0..data.len()).filter(|&i| self.predict(data.point(i)) == data.labels()[i]).count();
        Ok(T::of_usize(hits) / T::of_usize(data.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    /// Initial trial step of every backtracking search.
    pub lr: T,
    pub epochs: usize,
    pub mode: LossMode,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::one(),
            epochs: 500,
            mode: LossMode::Normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    /// Loss before training and after every completed epoch.
    pub losses: Vec<T>,
    /// Epochs that ended with no step satisfying the Armijo condition.
    pub stalled: usize,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

/// Full-batch gradient descent with Armijo backtracking from step `lr`.
///
/// A step is taken only if it decreases the loss by at least
/// `1e-4 * step * |grad|^2`, so the loss history never increases.
pub fn train_weighted<T: Real>(
    classifier: &TinyClassifier<T>,
    data: &WeightedDataset<T>,
    config: TrainConfig<T>,
) -> Result<(TinyClassifier<T>, TrainReport<T>)> {
    if !(config.lr.is_finite() && config.lr > T::zero()) {
        return Err(Error::InvalidSpec("learning rate must be positive".into()));
    }
    let mut model = classifier.clone();
    let (mut loss, mut grad) = model.loss_gradient(data, config.mode)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let mut report = TrainReport {
        losses: vec![loss],
        stalled: 0,
    };
    let mut trial = model.clone();
    for epoch in 1..=config.epochs {
        let g2: T = grad.iter().map(|&g| g * g).sum();
        let mut step = config.lr;
        let mut accepted = false;
        if g2 > T::zero() {
            for _ in 0..MAX_HALVINGS {
                for ((t, &p), &g) in trial.theta.iter_mut().zip(&model.theta).zip(&grad) {
                    *t = p - step * g;
                }
                let l = trial.loss(data, config.mode)?;
                if l.is_finite() && l <= loss - T::of(ARMIJO_C) * step * g2 {
                    accepted = true;
                    break;
                }
                step *= T::of(0.5);
            }
        }
        if accepted {
            std::mem::swap(&mut model, &mut trial);
            (loss, grad) = model.loss_gradient(data, config.mode)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
        } else {
            report.stalled += 1;
        }
        report.losses.push(loss);
    }
    Ok((model, report))
}

/// `|grad L_full - grad L_distilled|` at the classifier's parameters, both
/// losses normalized by their total weight.
pub fn gradient_discrepancy<T: Real>(
    classifier: &TinyClassifier<T>,
    full: &WeightedDataset<T>,
    distilled: &WeightedDataset<T>,
) -> Result<T> {
    let (_, a) = classifier.loss_gradient(full, LossMode::Normalized)?;
    let (_, b) = classifier.loss_gradient(distilled, LossMode::Normalized)?;
    Ok(a.iter().zip(&b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt())
}
