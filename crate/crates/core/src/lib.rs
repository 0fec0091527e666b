//! Weakly supervised semantic segmentation of airborne point clouds.
//!
//! The crate trains a per-point classifier from a sparse set of labeled
//! points. Besides the usual cross-entropy on labeled points, three
//! auxiliary signals exploit the unlabeled majority:
//!
//! - entropy regularization on unlabeled predictions,
//! - a consistency penalty between the current prediction and a per-point
//!   exponential moving average of past predictions,
//! - online soft pseudo-labels drawn from that moving average and weighted
//!   by its confidence.
//!
//! Module map:
//!
//! - [`cloud`]: point containers, grid subsampling, spatial queries, augmentation
//! - [`weak_labels`]: sparse, class-balanced, nested label selection
//! - [`sampler`]: potential-driven circular training batches and overlapping test tiles
//! - [`model`]: feature encoding, the reference perceptron backbone, SGD with momentum
//! - [`losses`]: all training objectives, the ensemble store and the ramp-up schedule
//! - [`trainer`]: the two-stage training loop and full-cloud prediction
//! - [`eval`]: metrics, synthetic scenes, file formats and the ablation runner

pub mod cloud;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod trainer;
pub mod weak_labels;

pub use cloud::{ClassCatalog, LabelArray, PointCloud, SubsampleMapping};
pub use error::{Error, Result};
pub use eval::metrics::{ConfusionMatrix, MetricsReport};
pub use losses::{EnsembleStore, LossBreakdown, PredictionMatrix};
pub use model::{ModelConfig, ModelParameters};
pub use sampler::{BatchSpec, MiniBatch, PotentialField};
pub use trainer::{TrainLog, TrainSchedule};
pub use weak_labels::WeakLabelSet;
