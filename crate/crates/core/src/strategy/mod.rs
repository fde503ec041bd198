//! Uplink size reduction: binarized model differences, random subsampling
//! and magnitude sparsification, with exact wire-size accounting.

mod diff;
mod sparse;
mod subsample;

pub use diff::{diff_apply, diff_binarize, SignMatrix};
pub use sparse::{
    csc_roundtrip, decode_sparse, encode_sparse, sparse_bits, sparsify, sparsify_zeroed, SparseClassModel, SparseRow,
    SPARSE_MAGIC,
};
pub(crate) use subsample::SubsampleSums;
pub use subsample::{subsample, subsample_aggregate, subsample_count, subsample_indices, Subsample};

use std::ops::AddAssign;

use rand::Rng;

use crate::channel::{transmit, transmit_rows, ChannelConfig, CodecConfig, HDFM_HEADER_BYTES};
use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StrategyConfig {
    /// Send the full local model.
    #[default]
    None,
    /// Send `sign(local - global)`; the server adds `step` times the sum.
    BinaryDiff { step: f64 },
    /// Send a random fraction `rate` of the parameters.
    Subsample { rate: f64 },
    /// Zero the fraction `sparsity` of smallest-magnitude entries per class and
    /// send the rest in compressed form.
    Sparsify { sparsity: f64 },
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::None => "none",
            StrategyConfig::BinaryDiff { .. } => "binary_diff",
            StrategyConfig::Subsample { .. } => "subsample",
            StrategyConfig::Sparsify { .. } => "sparsify",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StrategyConfig::None => Ok(()),
            StrategyConfig::BinaryDiff { step } if step > 0.0 && step.is_finite() => Ok(()),
            StrategyConfig::BinaryDiff { step } => {
                Err(Error::InvalidArgument(format!("binary_diff step must be positive, got {step}")))
            }
            StrategyConfig::Subsample { rate } => subsample::check_rate(rate),
            StrategyConfig::Sparsify { sparsity } => sparse::check_sparsity(sparsity),
        }
    }
}

/// Exact size of one serialized upload.
///
/// `header_bytes` covers the fixed header, quantizer gains and any seed;
/// `meta_bits` covers sparse counts and index gaps; `value_bits` is the
/// parameter payload proper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WireSize {
    pub header_bytes: usize,
    pub meta_bits: usize,
    pub value_bits: usize,
}

impl WireSize {
    pub fn total_bytes(&self) -> usize {
        self.header_bytes + (self.meta_bits + self.value_bits).div_ceil(8)
    }
}

impl AddAssign for WireSize {
    fn add_assign(&mut self, o: Self) {
        self.header_bytes += o.header_bytes;
        self.meta_bits += o.meta_bits;
        self.value_bits += o.value_bits;
    }
}

/// Bytes of the seed from which the server regenerates subsample positions.
pub const SUBSAMPLE_SEED_BYTES: usize = 8;

/// What a client puts on the uplink.
#[derive(Debug, Clone, PartialEq)]
pub enum Upload {
    Dense(ClassPrototypes),
    Signs(SignMatrix),
    Subsampled { sample: Subsample, num_classes: usize, hd_dim: usize },
    Sparse(SparseClassModel),
}

/// Builds the upload for `local` given the broadcast `global`.
pub fn encode_upload<R: Rng + ?Sized>(
    strategy: &StrategyConfig,
    local: &ClassPrototypes,
    global: &ClassPrototypes,
    rng: &mut R,
) -> Result<Upload> {
    strategy.validate()?;
    Ok(match *strategy {
        StrategyConfig::None => Upload::Dense(local.clone()),
        StrategyConfig::BinaryDiff { .. } => Upload::Signs(diff_binarize(local, global)?),
        StrategyConfig::Subsample { rate } => Upload::Subsampled {
            sample: subsample(local, rate, rng)?,
            num_classes: local.num_classes(),
            hd_dim: local.hd_dim(),
        },
        StrategyConfig::Sparsify { sparsity } => Upload::Sparse(sparsify(local, sparsity)?),
    })
}

impl Upload {
    /// Codec actually used on the wire: sign uploads always use one bit.
    pub fn wire_codec(&self, codec: &CodecConfig) -> CodecConfig {
        match self {
            Upload::Signs(_) => CodecConfig::SIGN,
            _ => *codec,
        }
    }

    fn row_lens(&self) -> Vec<usize> {
        match self {
            Upload::Dense(m) => vec![m.hd_dim(); m.num_classes()],
            Upload::Signs(s) => vec![s.hd_dim(); s.num_classes()],
            Upload::Subsampled { sample, num_classes, hd_dim } => {
                let mut lens = vec![0usize; *num_classes];
                sample.indices.iter().for_each(|&i| lens[i / hd_dim] += 1);
                lens
            }
            Upload::Sparse(s) => s.counts(),
        }
    }

    pub fn wire_size(&self, codec: &CodecConfig) -> WireSize {
        let codec = self.wire_codec(codec);
        let w = codec.width() as usize;
        let gains = |k: usize| if codec.has_gains() { 8 * k } else { 0 };
        match self {
            Upload::Dense(m) => WireSize {
                header_bytes: HDFM_HEADER_BYTES + gains(m.num_classes()),
                meta_bits: 0,
                value_bits: m.as_slice().len() * w,
            },
            Upload::Signs(s) => WireSize {
                header_bytes: HDFM_HEADER_BYTES,
                meta_bits: 0,
                value_bits: s.values().len() * w,
            },
            Upload::Subsampled { sample, num_classes, .. } => WireSize {
                header_bytes: HDFM_HEADER_BYTES + SUBSAMPLE_SEED_BYTES + gains(*num_classes),
                meta_bits: 0,
                value_bits: sample.values.len() * w,
            },
            Upload::Sparse(s) => {
                let (meta_bits, value_bits) = sparse_bits(&s.counts(), &codec);
                WireSize { header_bytes: HDFM_HEADER_BYTES + gains(s.num_classes()), meta_bits, value_bits }
            }
        }
    }

    /// Passes the parameter values through the channel; positions, counts and
    /// headers are delivered intact.
    pub fn transmit<R: Rng + ?Sized>(&self, channel: &ChannelConfig, rng: &mut R) -> Result<Upload> {
        let cfg = channel.with_codec(self.wire_codec(&channel.codec));
        Ok(match self {
            Upload::Dense(m) => {
                let v = transmit(m.as_slice(), m.num_classes(), &cfg, rng)?;
                Upload::Dense(ClassPrototypes::from_flat(m.num_classes(), m.hd_dim(), v, m.counts().to_vec())?)
            }
            Upload::Signs(s) => {
                let v = transmit(s.values(), s.num_classes(), &cfg, rng)?;
                Upload::Signs(SignMatrix::new(s.num_classes(), s.hd_dim(), v)?)
            }
            Upload::Subsampled { sample, num_classes, hd_dim } => {
                let values = transmit_rows(&sample.values, &self.row_lens(), &cfg, rng)?;
                Upload::Subsampled {
                    sample: Subsample { indices: sample.indices.clone(), values },
                    num_classes: *num_classes,
                    hd_dim: *hd_dim,
                }
            }
            Upload::Sparse(s) => {
                let values = transmit_rows(&s.values(), &self.row_lens(), &cfg, rng)?;
                let mut out = s.clone();
                out.set_values(&values)?;
                Upload::Sparse(out)
            }
        })
    }
}

/// Total serialized bytes of `upload` under `codec`.
pub fn wire_bytes(upload: &Upload, codec: &CodecConfig) -> usize {
    upload.wire_size(codec).total_bytes()
}
