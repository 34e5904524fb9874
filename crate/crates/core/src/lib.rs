//! Dataset distillation by weighted optimal quantization.
//!
//! The crate covers the full numerical pipeline on latent point clouds:
//!
//! * [`measure`]: discrete measures, Voronoi partitions and the quadratic
//!   distortion with its gradient;
//! * [`quantizer`]: CLVQ with companion weights, mini-batch k-means and
//!   Lloyd iterations;
//! * [`transport`]: exact Wasserstein-2 distances by network simplex;
//! * [`diffusion`]: analytic-score reverse diffusion of quantized
//!   measures and the contraction constants that bound it;
//! * [`risk`]: weighted expectations, Lipschitz gap checks and a small
//!   weighted-loss classifier;
//! * [`verify`]: the claim-by-claim verification suite.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the command-line tools
//! use.

// `!(x > 0)` deliberately rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod measure;
pub mod quantizer;
pub mod risk;
pub mod sampler;
pub mod scalar;
pub mod seed;
pub mod synthetic;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = measure::Point<f64>;
pub type Measure = measure::DiscreteMeasure<f64>;
pub type Grid = measure::QuantizationGrid<f64>;
pub type Partition = measure::VoronoiPartition<f64>;
pub type Quantization = quantizer::WeightedQuantization<f64>;
pub type Schedule = quantizer::StepSchedule<f64>;
pub type Sampler = sampler::Sampler<f64>;
pub type Plan = transport::TransportPlan<f64>;
pub type Sde = diffusion::SdeSpec<f64>;
pub type Reference = diffusion::ReferenceLaw<f64>;
pub type Bound = diffusion::BoundReport<f64>;
pub type TestFunction = risk::LipschitzSpec<f64>;
pub type Dataset = risk::WeightedDataset<f64>;
pub type Classifier = risk::TinyClassifier<f64>;
