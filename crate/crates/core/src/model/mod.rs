//! The backbone contract: encode features, forward, backward, optimize.
//!
//! The reference backbone is a small perceptron shared across points and
//! fed with handcrafted neighborhood descriptors. Any replacement only has
//! to produce per-point logits and gradients with respect to its own
//! parameters.

pub mod checkpoint;
pub mod eigen;
pub mod features;
mod mlp;
mod optim;

pub use checkpoint::Checkpoint;
pub use features::{encode_features, FeatureConfig, PointFeatures};
pub use mlp::{
    backward, features_matrix, forward, softmax, softmax_backward, BackboneOutput, Dense,
    ModelConfig, ModelParameters,
};
pub use optim::SgdMomentum;
