//! Random-projection encoding.

use std::ops::Deref;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{rng_from, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hd_dim: usize,
    pub seed: u64,
    /// Apply the element-wise sign after projecting.
    pub quantize: bool,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hd_dim == 0 {
            return Err(Error::InvalidDimension(format!(
                "input_dim={} hd_dim={} must both be positive",
                self.input_dim, self.hd_dim
            )));
        }
        if self.hd_dim < self.input_dim {
            return Err(Error::InvalidDimension(format!(
                "hd_dim={} must be at least input_dim={}",
                self.hd_dim, self.input_dim
            )));
        }
        Ok(())
    }

    pub fn projection(&self) -> Result<ProjectionMatrix> {
        self.validate()?;
        make_projection(self.input_dim, self.hd_dim, self.seed)
    }
}

/// `d x m` matrix whose rows are uniformly random unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    input_dim: usize,
    hd_dim: usize,
    rows: Vec<f64>,
}

impl ProjectionMatrix {
    /// Builds a matrix from explicit rows. Rows are used as given.
    pub fn from_rows(input_dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if input_dim == 0 || rows.is_empty() {
            return Err(Error::InvalidDimension("projection needs at least one row and column".into()));
        }
        let hd_dim = rows.len();
        let mut flat = Vec::with_capacity(hd_dim * input_dim);
        for r in rows {
            if r.len() != input_dim {
                return Err(Error::mismatch(input_dim, r.len()));
            }
            flat.extend(r);
        }
        Ok(Self { input_dim, hd_dim, rows: flat })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hd_dim(&self) -> usize {
        self.hd_dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.input_dim)
    }
}

/// Samples `d` directions uniformly from the unit sphere in `R^m`: each row is
/// `m` standard-normal draws normalised to unit length.
pub fn make_projection(m: usize, d: usize, seed: u64) -> Result<ProjectionMatrix> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidDimension(format!("m={m} d={d} must both be positive")));
    }
    let mut rng = rng_from(seed, &[stream::PROJECTION, m as u64, d as u64]);
    let mut rows = Vec::with_capacity(m * d);
    let mut row = vec![0.0f64; m];
    for _ in 0..d {
        loop {
            row.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                rows.extend(row.iter().map(|v| v / n));
                break;
            }
        }
    }
    Ok(ProjectionMatrix { input_dim: m, hd_dim: d, rows })
}

/// A length-`d` encoded sample. Values are real, or exactly `±1` when the
/// encoder quantizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypervector(pub Vec<f32>);

impl Hypervector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Deref for Hypervector {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl From<Vec<f32>> for Hypervector {
    fn from(v: Vec<f32>) -> Self {
        Hypervector(v)
    }
}

#[inline]
fn sign(v: f64) -> f32 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn project_into<T: Copy + Into<f64>>(phi: &ProjectionMatrix, x: &[T], quantize: bool, out: &mut [f32]) {
    for (o, row) in out.iter_mut().zip(phi.rows()) {
        let v = super::prototypes::dot(row, x);
        *o = if quantize { sign(v) } else { v as f32 };
    }
}

/// `Φx`, or `sign(Φx)` with `sign(0) = +1` when `quantize` is set.
pub fn encode(phi: &ProjectionMatrix, x: &[f64], quantize: bool) -> Result<Hypervector> {
    if x.len() != phi.input_dim {
        return Err(Error::mismatch(phi.input_dim, x.len()));
    }
    let mut out = vec![0.0f32; phi.hd_dim];
    project_into(phi, x, quantize, &mut out);
    Ok(Hypervector(out))
}

/// Encodes a row-major `n x m` feature matrix into a row-major `n x d` buffer.
pub fn encode_batch(phi: &ProjectionMatrix, features: &[f32], quantize: bool, exec: Exec) -> Result<Vec<f32>> {
    let m = phi.input_dim;
    if !features.len().is_multiple_of(m) {
        return Err(Error::mismatch(m, features.len() % m));
    }
    let n = features.len() / m;
    let d = phi.hd_dim;
    let mut out = vec![0.0f32; n * d];
    if n > 0 {
        exec.for_each_chunk_mut(&mut out, d, |i, row| {
            project_into(phi, &features[i * m..(i + 1) * m], quantize, row)
        });
    }
    Ok(out)
}

/// Recovers an input from an (optionally noisy) unquantized encoding as
/// `(m/d) Φᵀh`. For random unit rows `E[ΦᵀΦ] = (d/m) I`, so the `m/d` factor
/// makes the estimate unbiased.
pub fn reconstruct(phi: &ProjectionMatrix, h: &[f32]) -> Result<Vec<f64>> {
    if h.len() != phi.hd_dim {
        return Err(Error::mismatch(phi.hd_dim, h.len()));
    }
    let m = phi.input_dim;
    let mut x = vec![0.0f64; m];
    for (row, &hi) in phi.rows().zip(h) {
        let hi = hi as f64;
        x.iter_mut().zip(row).for_each(|(xj, r)| *xj += r * hi);
    }
    let scale = m as f64 / phi.hd_dim as f64;
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> ProjectionMatrix {
        ProjectionMatrix::from_rows(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn one_by_one_projection_is_unit() {
        for seed in 0..20 {
            let p = make_projection(1, 1, seed).unwrap();
            assert_eq!(p.row(0)[0].abs(), 1.0);
        }
    }

    #[test]
    fn projection_is_deterministic_and_unit_norm() {
        let a = make_projection(3, 5, 7).unwrap();
        let b = make_projection(3, 5, 7).unwrap();
        assert_eq!(a, b);
        for r in a.rows() {
            let n: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        assert_ne!(a, make_projection(3, 5, 8).unwrap());
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(matches!(make_projection(0, 4, 1), Err(Error::InvalidDimension(_))));
        assert!(matches!(make_projection(4, 0, 1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn random_rows_nearly_orthogonal() {
        let p = make_projection(4, 1000, 1).unwrap();
        let rows: Vec<&[f64]> = p.rows().collect();
        let (mut signed, mut abs, mut count) = (0.0, 0.0, 0usize);
        for i in 0..rows.len() {
            for j in (i + 1)..rows.len() {
                let c: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| a * b).sum();
                signed += c;
                abs += c.abs();
                count += 1;
            }
        }
        let signed = signed / count as f64;
        let abs = abs / count as f64;
        assert!(signed.abs() <= 0.1, "mean signed dot {signed}");
        // E|cos| between uniform directions in R^4 is Γ(2) / (√π Γ(5/2)) = 4 / (3π).
        let expected = 4.0 / (3.0 * std::f64::consts::PI);
        assert!((abs - expected).abs() < 0.01, "mean |dot| {abs} vs {expected}");
    }

    #[test]
    fn identity_projection_and_sign() {
        let phi = identity2();
        assert_eq!(encode(&phi, &[3.0, -2.0], false).unwrap().0, vec![3.0, -2.0]);
        assert_eq!(encode(&phi, &[3.0, -2.0], true).unwrap().0, vec![1.0, -1.0]);
        assert_eq!(encode(&phi, &[0.0, 0.0], true).unwrap().0, vec![1.0, 1.0]);
        assert!(matches!(encode(&phi, &[1.0], false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn batch_matches_single() {
        let phi = make_projection(5, 64, 3).unwrap();
        let xs: Vec<f32> = (0..5 * 7).map(|i| (i as f32 * 0.37).sin()).collect();
        let wide: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
        for q in [false, true] {
            let batch = encode_batch(&phi, &xs, q, Exec::Parallel).unwrap();
            for i in 0..7 {
                let one = encode(&phi, &wide[i * 5..(i + 1) * 5], q).unwrap();
                assert_eq!(&batch[i * 64..(i + 1) * 64], &one.0[..]);
            }
            assert_eq!(batch, encode_batch(&phi, &xs, q, Exec::Serial).unwrap());
        }
    }

    #[test]
    fn reconstruct_orthonormal_exact() {
        let phi = ProjectionMatrix::from_rows(
            3,
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, -1.0], vec![1.0, 0.0, 0.0]],
        )
        .unwrap();
        let x = [0.5, -1.25, 2.0];
        let h = encode(&phi, &x, false).unwrap();
        let back = reconstruct(&phi, &h).unwrap();
        for (a, b) in back.iter().zip(x) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(reconstruct(&phi, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(reconstruct(&phi, &[0.0; 2]).is_err());
    }
}
