//! Property tests for the structural guarantees of each subsystem.

use proptest::prelude::*;

use fedhd::channel::{
    apply_channel, decode_rows, deserialize_bits, encode_rows, quant_max, quantize_up, serialize_bits, ChannelConfig,
    ChannelKind, CodecConfig, PacketLoss,
};
use fedhd::data::{read_binary, synth_gaussian_mixture, write_binary, Dataset};
use fedhd::fed::{aggregate_weighted, partition_iid, partition_noniid};
use fedhd::hdc::{
    binary_retrain, encode, make_projection, predict, sgd_perceptron, similarity, BinaryWeight, ClassPrototypes,
};
use fedhd::rng::rng_from;
use fedhd::strategy::{diff_apply, diff_binarize, sparsify, sparsify_zeroed};

fn model(k: usize, d: usize) -> impl Strategy<Value = ClassPrototypes> {
    prop::collection::vec(-100.0f64..100.0, k * d)
        .prop_map(move |w| ClassPrototypes::from_flat(k, d, w, vec![1; k]).unwrap())
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (2usize..6, 1usize..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_rows_are_unit_and_reproducible(m in 1usize..24, extra in 0usize..40, seed in any::<u64>()) {
        let d = m + extra;
        let p = make_projection(m, d, seed).unwrap();
        prop_assert_eq!(p.hd_dim(), d);
        for r in p.rows() {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
        }
        prop_assert_eq!(p, make_projection(m, d, seed).unwrap());
    }

    #[test]
    fn quantized_encodings_are_bipolar(x in prop::collection::vec(-5.0f64..5.0, 6), seed in any::<u64>()) {
        let p = make_projection(6, 50, seed).unwrap();
        let h = encode(&p, &x, true).unwrap();
        prop_assert_eq!(h.0.len(), 50);
        prop_assert!(h.0.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn scaling_one_prototype_keeps_decisions(
        c in model(4, 16),
        h in prop::collection::vec(-1.0f32..1.0, 16),
        k in 0usize..4,
        a in 0.01f64..100.0,
    ) {
        let scores: Vec<f64> = c.rows().map(|r| similarity(r, &h).unwrap()).collect();
        let mut sorted = scores.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        prop_assume!(sorted[0] - sorted[1] > 1e-9);
        let mut scaled = c.clone();
        scaled.row_mut(k).iter_mut().for_each(|v| *v *= a);
        prop_assert_eq!(predict(&c, &h).unwrap(), predict(&scaled, &h).unwrap());
    }

    #[test]
    fn binary_retrain_is_sgd(
        data in prop::collection::vec((prop::collection::vec(-1.0f32..1.0, 8), any::<bool>()), 1..30),
        w0 in prop::collection::vec(-1.0f64..1.0, 8),
        eta in 0.01f64..2.0,
    ) {
        let samples: Vec<(&[f32], i8)> = data.iter().map(|(h, y)| (h.as_slice(), if *y { 1 } else { -1 })).collect();
        let a = binary_retrain(BinaryWeight(w0.clone()), &samples, eta, 3).unwrap();
        let b = sgd_perceptron(BinaryWeight(w0), &samples, eta, 3).unwrap();
        prop_assert_eq!(a.0, b.0);
    }

    #[test]
    fn averaging_identical_models_is_identity(
        g in model(3, 12),
        raw in prop::collection::vec(0.01f64..10.0, 1..8),
    ) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let models = vec![g.clone(); weights.len()];
        let out = aggregate_weighted(&models, &weights).unwrap();
        for (a, b) in out.as_slice().iter().zip(g.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn partitions_cover_disjointly(n in 1usize..300, clients in 1usize..20, seed in any::<u64>()) {
        prop_assume!(clients <= n);
        let p = partition_iid(n, clients, seed).unwrap();
        let mut seen = vec![false; n];
        for a in p.assignments() {
            for &i in a {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        let sum: f64 = p.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for (w, s) in p.weights().iter().zip(p.sizes()) {
            prop_assert!((w - s as f64 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn noniid_partitions_cover_disjointly(labels in prop::collection::vec(0usize..5, 40..200), clients in 1usize..10, seed in any::<u64>()) {
        let p = partition_noniid(&labels, clients, 2, seed).unwrap();
        let mut all: Vec<usize> = p.assignments().iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn lossless_codecs_round_trip(ints in prop::collection::vec(-1_000_000i64..1_000_000, 1..200), frac in prop::collection::vec(-1e6f32..1e6, 1..200)) {
        let v: Vec<f64> = ints.iter().map(|&i| i as f64).collect();
        let bits = serialize_bits(&v, &CodecConfig::INT32).unwrap();
        prop_assert_eq!(deserialize_bits(&bits, v.len(), &CodecConfig::INT32).unwrap(), v);
        let f: Vec<f64> = frac.iter().map(|&x| x as f64).collect();
        let bits = serialize_bits(&f, &CodecConfig::FLOAT32).unwrap();
        prop_assert_eq!(deserialize_bits(&bits, f.len(), &CodecConfig::FLOAT32).unwrap(), f);
        let s: Vec<f64> = ints.iter().map(|&i| if i >= 0 { 1.0 } else { -1.0 }).collect();
        let bits = serialize_bits(&s, &CodecConfig::SIGN).unwrap();
        prop_assert_eq!(deserialize_bits(&bits, s.len(), &CodecConfig::SIGN).unwrap(), s);
    }

    #[test]
    fn quantizer_uses_full_range(c in prop::collection::vec(-50.0f64..50.0, 1..100), b in 2u32..=32) {
        prop_assume!(c.iter().any(|&v| v != 0.0));
        let (q, gain) = quantize_up(&c, b).unwrap();
        prop_assert!(gain > 0.0);
        prop_assert_eq!(q.iter().map(|v| v.abs()).max().unwrap(), quant_max(b));
    }

    #[test]
    fn single_bit_flip_is_damped(c in prop::collection::vec(-1.0f64..1.0, 4..64), pick in any::<prop::sample::Index>()) {
        prop_assume!(c.iter().any(|&v| v != 0.0));
        let codec = CodecConfig::quantized(16).unwrap();
        let lens = [c.len()];
        let (bits, gains) = encode_rows(&c, &lens, &codec).unwrap();
        let (ints, _) = quantize_up(&c, 16).unwrap();
        let pos = pick.index(bits.len());
        let j = pos / 16;
        prop_assume!(ints[j].abs() >= 1 << 14);
        let mut flipped = bits.clone();
        flipped.flip(pos);
        let out = decode_rows(&flipped, &lens, &gains, &codec).unwrap();
        let clean = decode_rows(&bits, &lens, &gains, &codec).unwrap();
        prop_assert!((out[j] / clean[j]).abs() <= 3.0);
    }

    #[test]
    fn corruption_preserves_shape(m in model(3, 20), which in 0usize..5, seed in any::<u64>()) {
        let ch = match which {
            0 => ChannelConfig::ideal(),
            1 => ChannelConfig::awgn(0.0),
            2 => ChannelConfig::bsc(0.01, CodecConfig::FLOAT32),
            3 => ChannelConfig::bsc(0.01, CodecConfig::quantized(8).unwrap()),
            _ => ChannelConfig { kind: ChannelKind::PacketLoss { loss: PacketLoss::DropProbability(0.3), packet_bits: 64 }, codec: CodecConfig::INT32 },
        };
        let out = apply_channel(&m, &ch, &mut rng_from(seed, &[])).unwrap();
        prop_assert_eq!(out.num_classes(), 3);
        prop_assert_eq!(out.hd_dim(), 20);
        prop_assert_eq!(out.counts(), m.counts());
    }

    #[test]
    fn sign_differences_move_by_integers(
        (k, d) in shape(),
        seed in any::<u64>(),
        n in 1usize..12,
    ) {
        let mut rng = rng_from(seed, &[]);
        use rand::Rng;
        let mut rand_model = |scale: f64| {
            let w = (0..k * d).map(|_| (rng.random::<f64>() - 0.5) * scale).collect();
            ClassPrototypes::from_flat(k, d, w, vec![1; k]).unwrap()
        };
        let g = rand_model(10.0);
        let signs: Vec<_> = (0..n).map(|_| diff_binarize(&rand_model(10.0), &g).unwrap()).collect();
        prop_assert!(signs.iter().all(|s| s.values().iter().all(|&v| v == 1.0 || v == -1.0)));
        let out = diff_apply(&g, &signs, 1.0).unwrap();
        for (a, b) in out.as_slice().iter().zip(g.as_slice()) {
            let delta = a - b;
            prop_assert!((delta - delta.round()).abs() < 1e-9);
            prop_assert!(delta.round().abs() <= n as f64);
        }
    }

    #[test]
    fn sparsify_keeps_the_largest(m in model(3, 30), s in 0.0f64..0.99) {
        let sp = sparsify(&m, s).unwrap();
        let z = sparsify_zeroed(30, s);
        for (k, row) in sp.rows().iter().enumerate() {
            prop_assert!(row.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(row.indices.len() <= 30 - z);
            let full = m.row(k);
            let kept_min = row.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            let dropped_max = (0..30u32)
                .filter(|i| row.indices.binary_search(i).is_err())
                .map(|i| full[i as usize].abs())
                .fold(0.0, f64::max);
            prop_assert!(row.values.is_empty() || kept_min >= dropped_max);
        }
    }

    #[test]
    fn sparsified_similarity_is_bounded(m in model(2, 24), s in 0.0f64..0.95, h in prop::collection::vec(-1.0f32..1.0, 24)) {
        let dense = sparsify(&m, s).unwrap().to_dense().unwrap();
        let hmax = h.iter().fold(0.0f64, |a, &v| a.max(v.abs() as f64));
        for k in 0..2 {
            let c = m.row(k);
            let cs = dense.row(k);
            let zeroed: f64 = c.iter().zip(cs).filter(|(_, b)| **b == 0.0).map(|(a, _)| a.abs()).sum();
            let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let hn = h.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            prop_assume!(hn > 1e-6);
            // Compare raw dot products scaled by the dense norms.
            let d_full: f64 = c.iter().zip(&h).map(|(a, &b)| a * b as f64).sum::<f64>() / (nc * hn);
            let d_sparse: f64 = cs.iter().zip(&h).map(|(a, &b)| a * b as f64).sum::<f64>() / (nc * hn);
            prop_assert!((d_full - d_sparse).abs() <= zeroed * hmax / (nc * hn) + 1e-12);
        }
    }

    #[test]
    fn binary_datasets_round_trip(
        rows in prop::collection::vec((prop::collection::vec(-1e3f32..1e3, 5), 0usize..4), 1..40),
    ) {
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let k = labels.iter().max().unwrap() + 1;
        let feats: Vec<f32> = rows.iter().flat_map(|r| r.0.clone()).collect();
        let ds = Dataset::new(feats, labels, 5, k.max(2)).unwrap();
        prop_assert_eq!(read_binary(&write_binary(&ds).unwrap()).unwrap(), ds);
    }

    #[test]
    fn synthetic_classes_are_balanced(k in 2usize..6, m in 1usize..10, n in 1usize..20, seed in any::<u64>()) {
        let ds = synth_gaussian_mixture(k, m, n, 2.0, seed).unwrap();
        let mut counts = vec![0; k];
        ds.labels().iter().for_each(|&l| counts[l] += 1);
        prop_assert!(counts.iter().all(|&c| c == n));
        prop_assert_eq!(ds, synth_gaussian_mixture(k, m, n, 2.0, seed).unwrap());
    }
}
