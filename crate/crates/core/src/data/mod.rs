//! Datasets: delimited text and binary formats, normalisation, synthetic data.
//!
//! Features are opaque real vectors. Raw sensor features and embeddings from
//! an offline feature extractor go through the same pipeline.

mod binary;
mod delimited;
mod normalize;
mod synth;

pub use binary::{load_binary, read_binary, save_binary, write_binary, DatasetHeader, HDDS_MAGIC, HDDS_VERSION};
pub use delimited::{load_delimited, parse_delimited};
pub use normalize::{normalize_features, Standardizer};
pub use synth::{synth_gaussian_mixture, GaussianMixture};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hdc::{encode_batch, EncodedSet, ProjectionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// `n x m` features (row-major, 32-bit) with labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<usize>,
    input_dim: usize,
    num_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(features: Vec<f32>, labels: Vec<usize>, input_dim: usize, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("dataset needs at least one sample"));
        }
        if input_dim == 0 {
            return Err(Error::InvalidDimension("dataset needs at least one feature".into()));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::mismatch(labels.len() * input_dim, features.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Self { features, labels, input_dim, num_classes, split: Split::Train })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Raises the class count, e.g. so a test split agrees with its train
    /// split when the highest label is absent from one of them.
    pub fn set_num_classes(&mut self, k: usize) -> Result<()> {
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {k} classes")));
        }
        self.num_classes = k;
        Ok(())
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut [f32] {
        &mut self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Encodes every row with `phi`.
    pub fn encode(&self, phi: &ProjectionMatrix, quantize: bool, exec: Exec) -> Result<EncodedSet> {
        if phi.input_dim() != self.input_dim {
            return Err(Error::mismatch(phi.input_dim(), self.input_dim));
        }
        let data = encode_batch(phi, &self.features, quantize, exec)?;
        EncodedSet::new(phi.hd_dim(), self.num_classes, data, self.labels.clone())
    }

    /// Treats the rows as already-encoded hypervectors.
    pub fn into_encoded(self) -> Result<EncodedSet> {
        EncodedSet::new(self.input_dim, self.num_classes, self.features, self.labels)
    }

    pub fn from_encoded(set: &EncodedSet) -> Result<Self> {
        Dataset::new(set.data().to_vec(), set.labels().to_vec(), set.hd_dim(), set.num_classes())
    }
}
