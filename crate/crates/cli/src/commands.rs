//! Command implementations. Each returns its output document; writing it
//! and choosing the exit status is left to the caller.

use std::path::{Path, PathBuf};

use optquant::diffusion::{reverse_integrate, verify_main_theorem, BoundReport, ReferenceLaw, SdeKind, SdeSpec};
use optquant::measure::DiscreteMeasure;
use optquant::quantizer::{clvq, minibatch_kmeans, LloydConfig, StepSchedule, WeightedQuantization};
use optquant::risk::{train_weighted, Architecture, LipschitzSpec, LossMode, TinyClassifier, TrainConfig, WeightedDataset};
use optquant::sampler::Sampler;
use optquant::seed::derive_seed;
use optquant::synthetic::{demo_dataset, demo_eval_dataset, LabelledCloud};
use optquant::transport::{rate_scan, w2_discrete};
use optquant::verify::{run_suite, Suite};
use serde::Deserialize;

use crate::doc::{
    self, BoundRecord, CheckOutput, ClassRecord, DiffusionOutput, DistillSettings, DistillationOutput,
    RateScanOutput, SdeSettings, TrainOutput, VerifyOutput, W2Output,
};
use crate::error::{CliError, CliResult};
use crate::io::{read_labels, read_latents, write_labels, write_latents, LatentMatrix};

pub const DOC_VERSION: u32 = 1;
pub const SUB_SEED_RULE: &str = "splitmix64(seed ^ splitmix64(label))";
const HARMONIC_A: f64 = 1.0;
const HARMONIC_B: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScheduleArg {
    /// Mini-batch k-means, step `1 / v_k`.
    CountReciprocal,
    /// CLVQ with `gamma_i = 1 / (10 + i)`.
    Harmonic,
}

impl ScheduleArg {
    fn name(self) -> &'static str {
        match self {
            Self::CountReciprocal => "count-reciprocal",
            Self::Harmonic => "harmonic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SdeArg {
    Brownian,
    Ou,
}

impl SdeArg {
    fn kind(self) -> SdeKind {
        match self {
            Self::Brownian => SdeKind::Brownian,
            Self::Ou => SdeKind::OrnsteinUhlenbeck,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Brownian => "brownian",
            Self::Ou => "ou",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum WeightsArg {
    /// `sqrt(K) sqrt(v_k / sum_j v_j)`.
    VarianceReduced,
    /// `v_k / sum_j v_j`.
    Normalized,
    /// Every sample weighs one.
    Uniform,
}

impl WeightsArg {
    fn name(self) -> &'static str {
        match self {
            Self::VarianceReduced => "variance-reduced",
            Self::Normalized => "normalized",
            Self::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ArchArg {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone)]
pub struct DistillArgs {
    pub latents: PathBuf,
    pub labels: PathBuf,
    pub ipc: usize,
    pub schedule: ScheduleArg,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DiffuseArgs {
    pub distilled: PathBuf,
    pub reference: PathBuf,
    pub labels: PathBuf,
    pub sde: SdeArg,
    pub horizon: f64,
    pub delta: f64,
    pub steps: usize,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub distilled: PathBuf,
    pub weights: WeightsArg,
    pub arch: ArchArg,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub eval_latents: Option<PathBuf>,
    pub eval_labels: Option<PathBuf>,
}

/// File name only, so documents do not depend on the working directory.
fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn n_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn class_coords(m: &LatentMatrix, labels: &[usize], label: usize) -> Vec<f64> {
    (0..m.rows)
        .filter(|&i| labels[i] == label)
        .flat_map(|i| m.row(i).iter().copied())
        .collect()
}

fn class_record(label: usize, q: &WeightedQuantization<f64>) -> CliResult<ClassRecord> {
    Ok(ClassRecord {
        label,
        centroids: q.grid.centroids().map(<[f64]>::to_vec).collect(),
        counts: q.counts.clone(),
        weights: q.weights.clone(),
        variance_reduced_weights: q.variance_reduced_weights()?,
    })
}

/// Per-class weighted quantization of the latents.
pub fn distill(a: &DistillArgs) -> CliResult<DistillationOutput> {
    if a.ipc == 0 || a.batch_size == 0 || a.iterations == 0 {
        return Err(CliError::Usage("--ipc, --batch-size and --iterations must be positive".into()));
    }
    let m = read_latents(&a.latents)?;
    let labels = read_labels(&a.labels, m.rows)?;
    let classes = (0..n_classes(&labels))
        .map(|label| {
            let mu = DiscreteMeasure::uniform_flat(m.cols, class_coords(&m, &labels, label))?;
            let found = mu.distinct_support_len();
            if found < a.ipc {
                return Err(CliError::InsufficientPoints {
                    label,
                    needed: a.ipc,
                    found,
                });
            }
            let sub = derive_seed(a.seed, label as u64);
            let q = match a.schedule {
                ScheduleArg::CountReciprocal => minibatch_kmeans(&mu, a.ipc, a.batch_size, a.iterations, sub)?,
                ScheduleArg::Harmonic => {
                    let schedule = StepSchedule::Harmonic {
                        a: HARMONIC_A,
                        b: HARMONIC_B,
                    };
                    clvq(&Sampler::empirical(mu)?, a.ipc, schedule, a.batch_size * a.iterations, sub)?.quantization
                }
            };
            class_record(label, &q)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(DistillationOutput {
        kind: "distill".into(),
        version: DOC_VERSION,
        seed: a.seed,
        latents: file_name(&a.latents),
        labels: file_name(&a.labels),
        dim: m.cols,
        settings: DistillSettings {
            ipc: a.ipc,
            schedule: a.schedule.name().into(),
            batch_size: a.batch_size,
            iterations: a.iterations,
            harmonic_a: HARMONIC_A,
            harmonic_b: HARMONIC_B,
            init: "d-squared".into(),
            weight_sum_tolerance: 1e-9,
            sub_seed: SUB_SEED_RULE.into(),
        },
        classes,
    })
}

fn bound_record(label: usize, r: &BoundReport<f64>) -> BoundRecord {
    BoundRecord {
        label,
        lhs: r.lhs,
        rhs: r.rhs.is_finite().then_some(r.rhs),
        mc_stderr: r.mc_stderr,
        ratio: r.ratio.is_finite().then_some(r.ratio),
        pass: r.pass,
        w2: r.w2,
        constant: r.constant.is_finite().then_some(r.constant),
        lipschitz: r.lipschitz,
        k: r.k,
        n_mc: r.n_mc,
        seed: r.seed,
    }
}

/// Per class: transports the quantization from `T` to `delta` under the
/// score of that class's latents and checks the bound at level `K`.
///
/// Class `L` runs under `s = derive_seed(seed, L)`; the transport uses
/// noise seed `derive_seed(s, 0)` and the bound check `derive_seed(s, 1)`.
/// The test function is the distance to the class mean.
pub fn diffuse(a: &DiffuseArgs) -> CliResult<DiffusionOutput> {
    let distilled: DistillationOutput = doc::load(&a.distilled)?;
    let m = read_latents(&a.reference)?;
    let labels = read_labels(&a.labels, m.rows)?;
    if m.cols != distilled.dim {
        return Err(optquant::Error::Dimension {
            expected: distilled.dim,
            found: m.cols,
        }
        .into());
    }
    let sde = SdeSpec::new(a.sde.kind(), a.horizon, a.delta, a.steps)?;
    let mut classes = Vec::with_capacity(distilled.classes.len());
    let mut bounds = Vec::with_capacity(distilled.classes.len());
    for class in &distilled.classes {
        let coords = class_coords(&m, &labels, class.label);
        if coords.is_empty() {
            return Err(CliError::InsufficientPoints {
                label: class.label,
                needed: 1,
                found: 0,
            });
        }
        let reference = ReferenceLaw::new(DiscreteMeasure::uniform_flat(m.cols, coords)?);
        let start = DiscreteMeasure::from_flat(
            distilled.dim,
            class.centroids.concat(),
            class.weights.clone(),
        )
        .map_err(|e| CliError::BadDocument {
            path: a.distilled.clone(),
            detail: format!("class {}: {e}", class.label),
        })?;
        let sub = derive_seed(a.seed, class.label as u64);
        let moved = reverse_integrate(&start, &reference, &sde, derive_seed(sub, 0))?;
        let f = LipschitzSpec::distance_to_point(reference.base().mean());
        let report = verify_main_theorem(&reference, &sde, class.centroids.len(), &f, a.n_mc, derive_seed(sub, 1))?;
        classes.push(ClassRecord {
            centroids: moved.atoms().map(<[f64]>::to_vec).collect(),
            ..class.clone()
        });
        bounds.push(bound_record(class.label, &report));
    }
    Ok(DiffusionOutput {
        kind: "diffuse".into(),
        version: DOC_VERSION,
        seed: a.seed,
        distilled: file_name(&a.distilled),
        reference: file_name(&a.reference),
        labels: file_name(&a.labels),
        dim: distilled.dim,
        sde: SdeSettings {
            kind: a.sde.name().into(),
            horizon: a.horizon,
            delta: a.delta,
            steps: a.steps,
        },
        n_mc: a.n_mc,
        test_function: "distance to the class mean".into(),
        sub_seed: SUB_SEED_RULE.into(),
        classes,
        bounds,
    })
}

/// The fields shared by distillation and diffusion documents.
#[derive(Deserialize)]
struct Quantized {
    kind: String,
    dim: usize,
    classes: Vec<ClassRecord>,
}

/// Builds the training set from a distillation or diffusion document.
pub fn distilled_dataset(path: &Path, weights: WeightsArg) -> CliResult<WeightedDataset<f64>> {
    let q: Quantized = doc::load(path)?;
    if q.kind != "distill" && q.kind != "diffuse" {
        return Err(CliError::BadDocument {
            path: path.into(),
            detail: format!("expected a distill or diffuse document, found `{}`", q.kind),
        });
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut w = Vec::new();
    for c in &q.classes {
        let cw = match weights {
            WeightsArg::VarianceReduced => &c.variance_reduced_weights,
            WeightsArg::Normalized => &c.weights,
            WeightsArg::Uniform => &c.counts,
        };
        if cw.len() != c.centroids.len() {
            return Err(CliError::BadDocument {
                path: path.into(),
                detail: format!("class {} has {} centroids and {} weights", c.label, c.centroids.len(), cw.len()),
            });
        }
        coords.extend(c.centroids.concat());
        labels.extend(std::iter::repeat_n(c.label, c.centroids.len()));
        w.extend_from_slice(cw);
    }
    let data = match weights {
        WeightsArg::Uniform => WeightedDataset::unweighted(q.dim, coords, labels),
        _ => WeightedDataset::from_flat(q.dim, coords, labels, w),
    };
    data.map_err(|e| CliError::BadDocument {
        path: path.into(),
        detail: e.to_string(),
    })
}

pub fn train(a: &TrainArgs) -> CliResult<TrainOutput> {
    let data = distilled_dataset(&a.distilled, a.weights)?;
    let eval = match (&a.eval_latents, &a.eval_labels) {
        (Some(x), Some(y)) => {
            let m = read_latents(x)?;
            let labels = read_labels(y, m.rows)?;
            Some(WeightedDataset::unweighted(m.cols, m.values, labels)?)
        }
        (None, None) => None,
        _ => return Err(CliError::Usage("--eval-latents and --eval-labels go together".into())),
    };
    let n_classes = data.n_classes().max(eval.as_ref().map_or(0, WeightedDataset::n_classes));
    let arch = match a.arch {
        ArchArg::Logistic => Architecture::MultinomialLogistic,
        ArchArg::Mlp => Architecture::OneHiddenLayer { width: a.hidden },
    };
    let init = TinyClassifier::new(arch, data.dim(), n_classes, a.seed)?;
    let config = TrainConfig {
        lr: a.lr,
        epochs: a.epochs,
        mode: LossMode::Normalized,
    };
    let (model, report) = train_weighted(&init, &data, config)?;
    let eval_accuracy = eval.as_ref().map(|e| model.accuracy(e)).transpose()?;
    Ok(TrainOutput {
        kind: "train".into(),
        version: DOC_VERSION,
        seed: a.seed,
        distilled: file_name(&a.distilled),
        weights: a.weights.name().into(),
        architecture: match a.arch {
            ArchArg::Logistic => "logistic".into(),
            ArchArg::Mlp => "mlp".into(),
        },
        hidden: a.hidden,
        lr: a.lr,
        epochs: a.epochs,
        loss_mode: "normalized".into(),
        n_samples: data.len(),
        final_loss: *report.losses.last().expect("initial loss is recorded"),
        stalled: report.stalled > 0,
        train_accuracy: model.accuracy(&data)?,
        eval_accuracy,
        parameters: model.parameters().to_vec(),
    })
}

/// Exact `W2` between the uniform measures on two latent files.
pub fn w2(mu_path: &Path, nu_path: &Path) -> CliResult<W2Output> {
    let mu = read_latents(mu_path)?.measure()?;
    let nu = read_latents(nu_path)?.measure()?;
    let (w2, plan) = w2_discrete(&mu, &nu)?;
    Ok(W2Output {
        kind: "w2".into(),
        version: DOC_VERSION,
        mu: file_name(mu_path),
        nu: file_name(nu_path),
        w2,
        dual_bound: plan.dual_bound,
        pivots: plan.pivots,
    })
}

pub fn rate(dim: usize, levels: &[usize], samples: usize, restarts: usize, seed: u64) -> CliResult<RateScanOutput> {
    if levels.len() < 2 {
        return Err(CliError::Usage("--levels needs at least two values".into()));
    }
    let scan = rate_scan(&Sampler::uniform_cube(dim)?, levels, samples, restarts, seed, LloydConfig::default())?;
    Ok(RateScanOutput {
        kind: "rate-scan".into(),
        version: DOC_VERSION,
        seed,
        dim,
        samples,
        restarts,
        levels: scan.levels,
        errors: scan.errors,
        fitted_slope: scan.fitted_slope,
        target_slope: -1.0 / dim as f64,
    })
}

pub fn verify(suite: Suite, seed: u64) -> CliResult<VerifyOutput> {
    let records: Vec<CheckOutput> = run_suite(suite, seed)?
        .into_iter()
        .map(|r| CheckOutput {
            claim: r.claim,
            property: r.property,
            measured: r.measured,
            target: r.target,
            tolerance: r.tolerance,
            pass: r.pass,
        })
        .collect();
    let passed = records.iter().filter(|r| r.pass).count();
    Ok(VerifyOutput {
        kind: "verify".into(),
        version: DOC_VERSION,
        suite: suite.to_string(),
        seed,
        passed,
        failed: records.len() - passed,
        records,
    })
}

/// File names of the bundled demo data.
pub const DEMO_FILES: [&str; 4] = ["latents.oqdl", "labels.txt", "eval_latents.oqdl", "eval_labels.txt"];

fn cloud_matrix(c: &LabelledCloud<f64>) -> LatentMatrix {
    LatentMatrix::new(c.len(), c.dim, c.coords.clone())
}

/// Writes the demo training and held-out sets into `dir`.
pub fn demo(dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let paths: Vec<PathBuf> = DEMO_FILES.iter().map(|f| dir.join(f)).collect();
    for (cloud, (x, y)) in [demo_dataset(), demo_eval_dataset()]
        .iter()
        .zip([(&paths[0], &paths[1]), (&paths[2], &paths[3])])
    {
        write_latents(x, &cloud_matrix(cloud))?;
        write_labels(y, &cloud.labels)?;
    }
    Ok(paths)
}
