//! Class prototypes, cosine inference and perceptron-style retraining.

use crate::error::{Error, Result};

use super::Hypervector;

/// Dot product of an f64 row with an f32 (or f64) vector.
///
/// Four independent accumulators, combined in a fixed order, so the result is
/// deterministic and the loop vectorises.
#[inline]
pub fn dot<T: Copy + Into<f64>>(c: &[f64], h: &[T]) -> f64 {
    debug_assert_eq!(c.len(), h.len());
    let mut acc = [0.0f64; 4];
    let mut cc = c.chunks_exact(4);
    let mut hc = h.chunks_exact(4);
    for (a, b) in (&mut cc).zip(&mut hc) {
        acc[0] += a[0] * b[0].into();
        acc[1] += a[1] * b[1].into();
        acc[2] += a[2] * b[2].into();
        acc[3] += a[3] * b[3].into();
    }
    let tail: f64 = cc.remainder().iter().zip(hc.remainder()).map(|(a, &b)| a * b.into()).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(c: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut it = c.chunks_exact(4);
    for a in &mut it {
        acc[0] += a[0] * a[0];
        acc[1] += a[1] * a[1];
        acc[2] += a[2] * a[2];
        acc[3] += a[3] * a[3];
    }
    let tail: f64 = it.remainder().iter().map(|a| a * a).sum();
    ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail).sqrt()
}

/// An encoded sample with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub hv: Hypervector,
    pub label: usize,
}

impl LabeledSample {
    pub fn new(hv: impl Into<Hypervector>, label: usize) -> Self {
        Self { hv: hv.into(), label }
    }

    pub fn as_pair(&self) -> (&[f32], usize) {
        (&self.hv, self.label)
    }
}

/// `K` class hypervectors of length `d` (row-major) plus per-class counts of
/// bundled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrototypes {
    num_classes: usize,
    hd_dim: usize,
    weights: Vec<f64>,
    counts: Vec<u64>,
}

impl ClassPrototypes {
    pub fn zeros(num_classes: usize, hd_dim: usize) -> Result<Self> {
        Self::check_shape(num_classes, hd_dim)?;
        Ok(Self {
            num_classes,
            hd_dim,
            weights: vec![0.0; num_classes * hd_dim],
            counts: vec![0; num_classes],
        })
    }

    /// Builds prototypes from explicit rows with zero counts.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        Self::check_shape(k, d)?;
        let mut weights = Vec::with_capacity(k * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::mismatch(d, r.len()));
            }
            weights.extend(r);
        }
        Ok(Self { num_classes: k, hd_dim: d, weights, counts: vec![0; k] })
    }

    /// Builds prototypes from a flat row-major buffer.
    pub fn from_flat(num_classes: usize, hd_dim: usize, weights: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        Self::check_shape(num_classes, hd_dim)?;
        if weights.len() != num_classes * hd_dim {
            return Err(Error::mismatch(num_classes * hd_dim, weights.len()));
        }
        if counts.len() != num_classes {
            return Err(Error::mismatch(num_classes, counts.len()));
        }
        Ok(Self { num_classes, hd_dim, weights, counts })
    }

    fn check_shape(k: usize, d: usize) -> Result<()> {
        if k < 2 {
            return Err(Error::InvalidDimension(format!("need at least 2 classes, got {k}")));
        }
        if d == 0 {
            return Err(Error::InvalidDimension("hd_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hd_dim(&self) -> usize {
        self.hd_dim
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.hd_dim..(k + 1) * self.hd_dim]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.weights[k * self.hd_dim..(k + 1) * self.hd_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.hd_dim)
    }

    /// All parameters, row-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.weights
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.num_classes == other.num_classes && self.hd_dim == other.hd_dim
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.num_classes != other.num_classes {
            return Err(Error::mismatch(self.num_classes, other.num_classes));
        }
        if self.hd_dim != other.hd_dim {
            return Err(Error::mismatch(self.hd_dim, other.hd_dim));
        }
        Ok(())
    }

    pub fn norms(&self) -> Vec<f64> {
        self.rows().map(norm).collect()
    }

    /// Sum of squares of every parameter.
    pub fn power(&self) -> f64 {
        self.weights.iter().map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&v| v == 0.0)
    }

    /// Class index with the highest cosine similarity, given precomputed row
    /// norms. Ties go to the lowest index; zero rows score 0.
    pub fn predict_with_norms(&self, norms: &[f64], h: &[f32]) -> usize {
        self.scores_with_norms(norms, h).1
    }

    /// Similarity of `h` to every class, plus the argmax.
    pub fn scores_with_norms(&self, norms: &[f64], h: &[f32]) -> (Vec<f64>, usize) {
        let scores: Vec<f64> = self
            .rows()
            .zip(norms)
            .map(|(c, &n)| if n == 0.0 { 0.0 } else { dot(c, h) / n })
            .collect();
        let best = argmax_lowest(&scores);
        (scores, best)
    }
}

pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// `⟨c, h⟩ / ‖c‖`, defined as 0 for a zero prototype.
pub fn similarity(c: &[f64], h: &[f32]) -> Result<f64> {
    if c.len() != h.len() {
        return Err(Error::mismatch(c.len(), h.len()));
    }
    let n = norm(c);
    Ok(if n == 0.0 { 0.0 } else { dot(c, h) / n })
}

/// Label of the most similar prototype.
pub fn predict(protos: &ClassPrototypes, h: &[f32]) -> Result<usize> {
    if h.len() != protos.hd_dim {
        return Err(Error::mismatch(protos.hd_dim, h.len()));
    }
    Ok(protos.predict_with_norms(&protos.norms(), h))
}

/// Bundles every sample into the prototype of its class by element-wise sum.
/// Classes without samples keep a zero prototype and a zero count.
pub fn one_shot_train<'a, I>(samples: I, num_classes: usize) -> Result<ClassPrototypes>
where
    I: IntoIterator<Item = (&'a [f32], usize)>,
{
    let mut it = samples.into_iter().peekable();
    let d = it.peek().ok_or(Error::Empty("one-shot training needs at least one sample"))?.0.len();
    let mut protos = ClassPrototypes::zeros(num_classes, d)?;
    for (h, label) in it {
        if h.len() != d {
            return Err(Error::mismatch(d, h.len()));
        }
        if label >= num_classes {
            return Err(Error::InvalidArgument(format!("label {label} out of range for {num_classes} classes")));
        }
        protos.row_mut(label).iter_mut().zip(h).for_each(|(c, &v)| *c += v as f64);
        protos.counts[label] += 1;
    }
    Ok(protos)
}

/// One retraining pass in the given sample order. On a misprediction `k'` of a
/// sample with label `k`, adds `alpha·h` to `c_k` and subtracts it from `c_k'`.
/// Counts are unchanged. Returns the number of updates.
pub fn retrain_epoch<'a, I>(protos: &mut ClassPrototypes, samples: I, alpha: f64) -> Result<usize>
where
    I: IntoIterator<Item = (&'a [f32], usize)>,
{
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {alpha}")));
    }
    let d = protos.hd_dim;
    let mut norms = protos.norms();
    let mut updates = 0;
    for (h, label) in samples {
        if h.len() != d {
            return Err(Error::mismatch(d, h.len()));
        }
        if label >= protos.num_classes {
            return Err(Error::InvalidArgument(format!("label {label} out of range")));
        }
        let pred = protos.predict_with_norms(&norms, h);
        if pred != label {
            protos.row_mut(label).iter_mut().zip(h).for_each(|(c, &v)| *c += alpha * v as f64);
            protos.row_mut(pred).iter_mut().zip(h).for_each(|(c, &v)| *c -= alpha * v as f64);
            norms[label] = norm(protos.row(label));
            norms[pred] = norm(protos.row(pred));
            updates += 1;
        }
    }
    Ok(updates)
}
