use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};

use crate::error::{Error, Result};

use super::bits::BitStream;

/// Adds zero-mean Gaussian noise so that total noise power is
/// `P / 10^(snr_db/10)` with `P = Σ v²`, split evenly across all entries.
/// An all-zero input, or `snr_db = +inf`, is returned unchanged.
pub fn awgn_perturb<R: Rng + ?Sized>(values: &mut [f64], snr_db: f64, rng: &mut R) {
    if values.is_empty() || snr_db == f64::INFINITY {
        return;
    }
    let power: f64 = values.iter().map(|v| v * v).sum();
    if power == 0.0 {
        return;
    }
    let sigma2 = power / 10f64.powf(snr_db / 10.0);
    let std = (sigma2 / values.len() as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    values.iter_mut().for_each(|v| *v += normal.sample(rng));
}

/// Flips each bit independently with probability `p_e`.
///
/// For small `p_e` the gaps between flips are drawn geometrically, so the cost
/// scales with the number of errors rather than the stream length.
pub fn bsc_flip<R: Rng + ?Sized>(bits: &mut BitStream, p_e: f64, rng: &mut R) -> Result<usize> {
    check_prob(p_e, "bit error rate")?;
    let n = bits.len();
    if p_e == 0.0 || n == 0 {
        return Ok(0);
    }
    if p_e == 1.0 {
        bits.invert();
        return Ok(n);
    }
    let mut flips = 0;
    if p_e < 0.25 {
        let gap = Geometric::new(p_e).expect("p in (0,1)");
        let mut pos = 0usize;
        loop {
            let skip = gap.sample(rng);
            pos = match usize::try_from(skip).ok().and_then(|s| pos.checked_add(s)) {
                Some(p) if p < n => p,
                _ => break,
            };
            bits.flip(pos);
            flips += 1;
            pos += 1;
        }
    } else {
        for i in 0..n {
            if rng.random_bool(p_e) {
                bits.flip(i);
                flips += 1;
            }
        }
    }
    Ok(flips)
}

/// Probability that an `n_p`-bit packet contains at least one bit error.
pub fn packet_error_prob(p_e: f64, n_p: usize) -> f64 {
    if p_e >= 1.0 {
        return 1.0;
    }
    -(n_p as f64 * (-p_e).ln_1p()).exp_m1()
}

/// Splits `bits` into `ceil(len / n_p)` packets, drops each with probability
/// `p_drop` and zero-fills the dropped ones. Returns the dropped indices.
pub fn drop_packets<R: Rng + ?Sized>(bits: &mut BitStream, n_p: usize, p_drop: f64, rng: &mut R) -> Result<Vec<usize>> {
    if n_p == 0 {
        return Err(Error::InvalidArgument("packet size must be at least one bit".into()));
    }
    check_prob(p_drop, "packet drop probability")?;
    let packets = bits.len().div_ceil(n_p);
    let mut dropped = Vec::new();
    if p_drop == 0.0 {
        return Ok(dropped);
    }
    for j in 0..packets {
        if rng.random_bool(p_drop) {
            bits.clear_range(j * n_p, (j + 1) * n_p);
            dropped.push(j);
        }
    }
    Ok(dropped)
}

/// [`drop_packets`] with the drop probability derived from a bit error rate.
pub fn packetize_and_drop<R: Rng + ?Sized>(bits: &mut BitStream, n_p: usize, p_e: f64, rng: &mut R) -> Result<Vec<usize>> {
    check_prob(p_e, "bit error rate")?;
    drop_packets(bits, n_p, packet_error_prob(p_e, n_p), rng)
}

pub(crate) fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} {p} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn awgn_trivial_cases() {
        let mut rng = rng_from(1, &[]);
        let mut z = vec![0.0; 8];
        awgn_perturb(&mut z, -10.0, &mut rng);
        assert!(z.iter().all(|&v| v == 0.0));
        let mut v = vec![1.0, -2.0];
        awgn_perturb(&mut v, f64::INFINITY, &mut rng);
        assert_eq!(v, vec![1.0, -2.0]);
    }

    #[test]
    fn awgn_noise_power_matches_snr() {
        // 100 entries of 1.0: P = 100, 20 dB -> total noise power 1.
        let mut rng = rng_from(2, &[]);
        let trials = 10_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let mut v = vec![1.0; 100];
            awgn_perturb(&mut v, 20.0, &mut rng);
            total += v.iter().map(|x| (x - 1.0) * (x - 1.0)).sum::<f64>();
        }
        let mean = total / trials as f64;
        assert!((mean - 1.0).abs() < 0.05, "noise power {mean}");
    }

    #[test]
    fn bsc_extremes() {
        let mut rng = rng_from(3, &[]);
        let mut b = BitStream::zeros(37);
        assert_eq!(bsc_flip(&mut b, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(b.count_ones(), 0);
        bsc_flip(&mut b, 1.0, &mut rng).unwrap();
        assert_eq!(b.count_ones(), 37);
        assert!(bsc_flip(&mut b, 1.5, &mut rng).is_err());
    }

    #[test]
    fn bsc_four_bit_vectors_uniform_at_half() {
        let mut rng = rng_from(4, &[]);
        let mut hist = [0usize; 16];
        let trials = 64_000;
        for _ in 0..trials {
            let mut b = BitStream::zeros(4);
            bsc_flip(&mut b, 0.5, &mut rng).unwrap();
            hist[b.read(0, 4) as usize] += 1;
        }
        for &c in &hist {
            let f = c as f64 / trials as f64;
            assert!((f - 1.0 / 16.0).abs() < 0.005, "freq {f}");
        }
    }

    #[test]
    fn bsc_rate_small_p() {
        let mut rng = rng_from(5, &[]);
        let mut b = BitStream::zeros(1_000_000);
        let n = bsc_flip(&mut b, 1e-3, &mut rng).unwrap();
        assert_eq!(n, b.count_ones());
        assert!((n as f64 - 1000.0).abs() < 5.0 * 1000f64.sqrt(), "flips {n}");
    }

    #[test]
    fn packet_error_probability() {
        assert_eq!(packet_error_prob(0.0, 100), 0.0);
        assert_eq!(packet_error_prob(1.0, 100), 1.0);
        let exact = 1.0 - 0.999f64.powi(100);
        assert!((packet_error_prob(1e-3, 100) - exact).abs() < 1e-15);
        assert!((packet_error_prob(1e-3, 100) - 0.09521).abs() < 1e-5);
    }

    #[test]
    fn packet_drops() {
        let mut rng = rng_from(6, &[]);
        let mut b = BitStream::zeros(100);
        b.invert();
        assert!(packetize_and_drop(&mut b, 10, 0.0, &mut rng).unwrap().is_empty());
        assert_eq!(b.count_ones(), 100);
        let d = drop_packets(&mut b, 30, 1.0, &mut rng).unwrap();
        assert_eq!(d, vec![0, 1, 2, 3]);
        assert_eq!(b.count_ones(), 0);
        assert!(drop_packets(&mut b, 0, 0.1, &mut rng).is_err());
    }
}
