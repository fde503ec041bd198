//! Hyperdimensional encoding and training.

mod binary;
mod encoder;
mod fisher;
mod prototypes;
mod set;

pub use binary::{binary_mistakes, binary_retrain, perceptron_loss, perceptron_subgradient, sgd_perceptron, BinaryWeight};
pub use encoder::{encode, encode_batch, make_projection, reconstruct, EncoderConfig, Hypervector, ProjectionMatrix};
pub use fisher::{fisher_decision, fisher_direction};
pub use prototypes::{dot, norm, one_shot_train, predict, retrain_epoch, similarity, ClassPrototypes, LabeledSample};
pub use set::EncodedSet;

/// Hypervector dimension used when none is configured.
pub const DEFAULT_HD_DIM: usize = 10_000;
