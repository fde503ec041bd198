//! Uplink channel models and the model bit codec.
//!
//! Noise is applied either to real parameter values directly (AWGN, uncoded
//! transmission) or to the serialized bitstream (bit flips, packet loss). Only
//! parameter bits travel through the corrupting channel; headers, gains and
//! sparse index metadata are assumed to arrive intact.

mod bits;
mod codec;
mod noise;

pub use bits::BitStream;
pub use codec::{
    decode_model, decode_rows, deserialize_bits, encode_model, encode_rows, hdfm_size, quant_max, quantize_up, read_hdfm, scale_down,
    serialize_bits, write_hdfm, CodecConfig, QuantizedModel, Representation, WirePayload, HDFM_HEADER_BYTES,
    HDFM_MAGIC, HDFM_VERSION,
};
pub use noise::{awgn_perturb, bsc_flip, drop_packets, packet_error_prob, packetize_and_drop};

use rand::Rng;

use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

/// Packet drop rate, either derived from a bit error rate and the packet size
/// or given directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketLoss {
    BitErrorRate(f64),
    DropProbability(f64),
}

impl PacketLoss {
    pub fn drop_probability(&self, packet_bits: usize) -> f64 {
        match *self {
            PacketLoss::BitErrorRate(p) => packet_error_prob(p, packet_bits),
            PacketLoss::DropProbability(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ChannelKind {
    #[default]
    Ideal,
    Awgn { snr_db: f64 },
    Bsc { p_e: f64 },
    PacketLoss { loss: PacketLoss, packet_bits: usize },
}

impl ChannelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::Ideal => "ideal",
            ChannelKind::Awgn { .. } => "awgn",
            ChannelKind::Bsc { .. } => "bsc",
            ChannelKind::PacketLoss { .. } => "packet_loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub codec: CodecConfig,
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn awgn(snr_db: f64) -> Self {
        Self { kind: ChannelKind::Awgn { snr_db }, codec: CodecConfig::FLOAT32 }
    }

    pub fn bsc(p_e: f64, codec: CodecConfig) -> Self {
        Self { kind: ChannelKind::Bsc { p_e }, codec }
    }

    pub fn packet_loss(loss: PacketLoss, packet_bits: usize, codec: CodecConfig) -> Self {
        Self { kind: ChannelKind::PacketLoss { loss, packet_bits }, codec }
    }

    pub fn with_codec(mut self, codec: CodecConfig) -> Self {
        self.codec = codec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ChannelKind::Ideal => Ok(()),
            ChannelKind::Awgn { snr_db } if snr_db.is_nan() || snr_db == f64::NEG_INFINITY => {
                Err(Error::InvalidArgument(format!("snr_db must be a number above -inf, got {snr_db}")))
            }
            ChannelKind::Awgn { .. } => Ok(()),
            ChannelKind::Bsc { p_e } => noise::check_prob(p_e, "bit error rate"),
            ChannelKind::PacketLoss { loss, packet_bits } => {
                if packet_bits == 0 {
                    return Err(Error::InvalidArgument("packet_bits must be positive".into()));
                }
                match loss {
                    PacketLoss::BitErrorRate(p) => noise::check_prob(p, "bit error rate"),
                    PacketLoss::DropProbability(p) => noise::check_prob(p, "packet drop probability"),
                }
            }
        }
    }
}

/// Sends `values`, grouped into `rows` equal rows (one quantizer gain each),
/// through the channel and returns what the receiver decodes.
pub fn transmit<R: Rng + ?Sized>(values: &[f64], rows: usize, cfg: &ChannelConfig, rng: &mut R) -> Result<Vec<f64>> {
    if rows == 0 || !values.len().is_multiple_of(rows) {
        return Err(Error::InvalidArgument(format!("{} values do not split into {rows} rows", values.len())));
    }
    transmit_rows(values, &vec![values.len() / rows; rows], cfg, rng)
}

/// Like [`transmit`] with rows of arbitrary length.
///
/// With the 1-bit sign codec, parameters lost to a dropped packet decode as 0
/// (an erasure) rather than as `-1`.
pub fn transmit_rows<R: Rng + ?Sized>(values: &[f64], row_lens: &[usize], cfg: &ChannelConfig, rng: &mut R) -> Result<Vec<f64>> {
    cfg.validate()?;
    match cfg.kind {
        ChannelKind::Ideal => Ok(values.to_vec()),
        ChannelKind::Awgn { snr_db } => {
            let mut v = values.to_vec();
            awgn_perturb(&mut v, snr_db, rng);
            Ok(v)
        }
        ChannelKind::Bsc { p_e } => {
            let (mut bits, gains) = encode_rows(values, row_lens, &cfg.codec)?;
            bsc_flip(&mut bits, p_e, rng)?;
            decode_rows(&bits, row_lens, &gains, &cfg.codec)
        }
        ChannelKind::PacketLoss { loss, packet_bits } => {
            let (mut bits, gains) = encode_rows(values, row_lens, &cfg.codec)?;
            let dropped = drop_packets(&mut bits, packet_bits, loss.drop_probability(packet_bits), rng)?;
            let mut out = decode_rows(&bits, row_lens, &gains, &cfg.codec)?;
            if cfg.codec.representation() == Representation::Sign {
                for j in dropped {
                    let end = ((j + 1) * packet_bits).min(out.len());
                    out[j * packet_bits..end].iter_mut().for_each(|v| *v = 0.0);
                }
            }
            Ok(out)
        }
    }
}

/// Passes a whole model through the channel. Shape and counts are preserved.
pub fn apply_channel<R: Rng + ?Sized>(model: &ClassPrototypes, cfg: &ChannelConfig, rng: &mut R) -> Result<ClassPrototypes> {
    let values = transmit(model.as_slice(), model.num_classes(), cfg, rng)?;
    ClassPrototypes::from_flat(model.num_classes(), model.hd_dim(), values, model.counts().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn model() -> ClassPrototypes {
        ClassPrototypes::from_rows(vec![vec![1.5, -2.0, 0.25, 8.0], vec![0.0, 3.0, -1.0, 0.5]]).unwrap()
    }

    #[test]
    fn ideal_and_zero_error_are_identity() {
        let mut rng = rng_from(0, &[]);
        let m = model();
        assert_eq!(apply_channel(&m, &ChannelConfig::ideal(), &mut rng).unwrap(), m);
        for codec in [CodecConfig::FLOAT32, CodecConfig::INT32] {
            let out = apply_channel(&m, &ChannelConfig::bsc(0.0, codec), &mut rng).unwrap();
            if codec == CodecConfig::FLOAT32 {
                assert_eq!(out, m);
            }
        }
        let pl = ChannelConfig::packet_loss(PacketLoss::BitErrorRate(0.0), 64, CodecConfig::FLOAT32);
        assert_eq!(apply_channel(&m, &pl, &mut rng).unwrap(), m);
    }

    #[test]
    fn drop_everything_gives_zeros() {
        let mut rng = rng_from(1, &[]);
        for codec in [CodecConfig::FLOAT32, CodecConfig::quantized(8).unwrap(), CodecConfig::SIGN] {
            let cfg = ChannelConfig::packet_loss(PacketLoss::DropProbability(1.0), 7, codec);
            let out = apply_channel(&model(), &cfg, &mut rng).unwrap();
            assert!(out.is_zero());
        }
    }

    #[test]
    fn invalid_configs_fail_before_corruption() {
        let mut rng = rng_from(2, &[]);
        let bad = [
            ChannelConfig::bsc(-0.1, CodecConfig::FLOAT32),
            ChannelConfig::packet_loss(PacketLoss::DropProbability(0.5), 0, CodecConfig::FLOAT32),
            ChannelConfig::packet_loss(PacketLoss::BitErrorRate(2.0), 8, CodecConfig::FLOAT32),
            ChannelConfig::awgn(f64::NAN),
        ];
        for c in bad {
            assert!(apply_channel(&model(), &c, &mut rng).is_err());
        }
    }

    #[test]
    fn packet_drop_frequency() {
        let mut rng = rng_from(3, &[]);
        let m = ClassPrototypes::from_flat(2, 500, vec![1.0; 1000], vec![0, 0]).unwrap();
        let cfg = ChannelConfig::packet_loss(PacketLoss::DropProbability(0.2), 320, CodecConfig::FLOAT32);
        let trials = 500;
        let mut zeroed = 0usize;
        for _ in 0..trials {
            let out = apply_channel(&m, &cfg, &mut rng).unwrap();
            zeroed += out.as_slice().iter().filter(|&&v| v == 0.0).count();
        }
        let frac = zeroed as f64 / (trials * 1000) as f64;
        assert!((frac - 0.2).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn sign_codec_flips_signs() {
        let mut rng = rng_from(4, &[]);
        let signs = vec![1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let out = transmit(&signs, 2, &ChannelConfig::bsc(1.0, CodecConfig::SIGN), &mut rng).unwrap();
        assert_eq!(out, signs.iter().map(|v| -v).collect::<Vec<_>>());
    }

    #[test]
    fn quantized_bsc_keeps_shape_and_finiteness() {
        let mut rng = rng_from(5, &[]);
        let cfg = ChannelConfig::bsc(0.05, CodecConfig::quantized(16).unwrap());
        let out = apply_channel(&model(), &cfg, &mut rng).unwrap();
        assert!(out.same_shape(&model()));
        assert!(out.as_slice().iter().all(|v| v.is_finite() && v.abs() <= 8.0 * 32768.0 / 32767.0));
    }
}
