//! End-to-end runs across strategies, channels and file formats.

use fedhd::channel::{decode_model, encode_model, hdfm_size, ChannelConfig, CodecConfig, PacketLoss, HDFM_HEADER_BYTES};
use fedhd::data::{load_binary, save_binary, Dataset, GaussianMixture};
use fedhd::fed::{partition_iid, partition_noniid, run_training, BatchSize, RoundConfig};
use fedhd::hdc::{EncodedSet, EncoderConfig};
use fedhd::strategy::{subsample_count, StrategyConfig, SUBSAMPLE_SEED_BYTES};
use fedhd::Exec;

const K: usize = 4;
const D: usize = 200;

fn sets() -> (EncodedSet, EncodedSet) {
    let mix = GaussianMixture::new(K, 12, 3.0, 9).unwrap();
    let enc = EncoderConfig { input_dim: 12, hd_dim: D, seed: 4, quantize: false };
    let phi = enc.projection().unwrap();
    let tr = mix.sample(40, 1).unwrap().encode(&phi, false, Exec::Serial).unwrap();
    let te = mix.sample(20, 2).unwrap().encode(&phi, false, Exec::Serial).unwrap();
    (tr, te)
}

fn round() -> RoundConfig {
    RoundConfig { num_clients: 10, participation: 0.3, rounds: 4, seed: 11, ..RoundConfig::default() }
}

#[test]
fn every_strategy_composes_with_every_channel() {
    let (tr, te) = sets();
    let p = partition_iid(tr.len(), 10, 3).unwrap();
    let q8 = CodecConfig::quantized(8).unwrap();
    let channels = [
        ChannelConfig::ideal(),
        ChannelConfig::awgn(10.0),
        ChannelConfig::bsc(1e-3, q8),
        ChannelConfig::packet_loss(PacketLoss::DropProbability(0.1), 100, CodecConfig::INT32),
        ChannelConfig::packet_loss(PacketLoss::BitErrorRate(1e-4), 100, CodecConfig::FLOAT32),
    ];
    let strategies = [
        StrategyConfig::None,
        StrategyConfig::BinaryDiff { step: 1.0 },
        StrategyConfig::Subsample { rate: 0.25 },
        StrategyConfig::Sparsify { sparsity: 0.5 },
    ];
    for ch in channels {
        for st in strategies {
            let out = run_training(&tr, Some(&te), &p, round(), ch, st, Exec::default()).unwrap();
            assert_eq!(out.model.num_classes(), K, "{ch:?} {st:?}");
            assert_eq!(out.model.hd_dim(), D);
            assert_eq!(out.records.len(), 4);
            for r in &out.records {
                assert!((0.0..=1.0).contains(&r.accuracy));
                assert_eq!(r.participants.len(), 3);
                assert!(r.uplink_bytes > 0);
            }
        }
    }
}

#[test]
fn uplink_bytes_match_the_wire_format() {
    let (tr, te) = sets();
    let p = partition_iid(tr.len(), 10, 3).unwrap();
    let q12 = CodecConfig::quantized(12).unwrap();
    let kd = K * D;
    let cases = [
        (StrategyConfig::None, CodecConfig::FLOAT32, hdfm_size(K, D, &CodecConfig::FLOAT32)),
        (StrategyConfig::None, q12, hdfm_size(K, D, &q12)),
        (StrategyConfig::BinaryDiff { step: 1.0 }, CodecConfig::FLOAT32, HDFM_HEADER_BYTES + kd.div_ceil(8)),
        (
            StrategyConfig::Subsample { rate: 0.1 },
            CodecConfig::INT32,
            HDFM_HEADER_BYTES + SUBSAMPLE_SEED_BYTES + (subsample_count(kd, 0.1) * 32).div_ceil(8),
        ),
    ];
    for (st, codec, per_client) in cases {
        let ch = ChannelConfig::ideal().with_codec(codec);
        let out = run_training(&tr, Some(&te), &p, round(), ch, st, Exec::Serial).unwrap();
        for r in &out.records {
            assert_eq!(r.uplink_bytes, (per_client * r.participants.len()) as u64, "{st:?} {codec:?}");
            assert_eq!(r.downlink_bytes, (hdfm_size(K, D, &CodecConfig::FLOAT32) * r.participants.len()) as u64);
        }
    }
}

#[test]
fn training_learns_under_noniid_split() {
    let (tr, te) = sets();
    let p = partition_noniid(tr.labels(), 8, 2, 5).unwrap();
    let cfg = RoundConfig { num_clients: 8, participation: 0.5, rounds: 10, batch: BatchSize::Size(5), ..round() };
    let out = run_training(&tr, Some(&te), &p, cfg, ChannelConfig::ideal(), StrategyConfig::None, Exec::Serial).unwrap();
    let acc = out.records.last().unwrap().accuracy;
    assert!(acc > 0.8, "{acc}");
}

#[test]
fn model_and_dataset_files_round_trip() {
    let (tr, te) = sets();
    let p = partition_iid(tr.len(), 10, 3).unwrap();
    let out = run_training(&tr, Some(&te), &p, round(), ChannelConfig::ideal(), StrategyConfig::None, Exec::Serial).unwrap();
    let bytes = encode_model(&out.model, &CodecConfig::FLOAT32).unwrap();
    assert_eq!(bytes.len(), hdfm_size(K, D, &CodecConfig::FLOAT32));
    let back = decode_model(&bytes).unwrap();
    for (a, b) in back.as_slice().iter().zip(out.model.as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    // Accuracy survives float32 narrowing on this model.
    let a = te.accuracy(&out.model, Exec::Serial).unwrap();
    let b = te.accuracy(&back, Exec::Serial).unwrap();
    assert!((a - b).abs() <= 0.02);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("te.hdds");
    save_binary(&Dataset::from_encoded(&te).unwrap(), &path).unwrap();
    let reloaded = load_binary(&path).unwrap().into_encoded().unwrap();
    assert_eq!(reloaded, te);
}
