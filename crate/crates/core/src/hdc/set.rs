//! Flat storage for an encoded dataset and whole-set evaluation.

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::prototypes::argmax_lowest;
use super::ClassPrototypes;

/// `n` hypervectors of length `d`, row-major, with labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet {
    hd_dim: usize,
    num_classes: usize,
    data: Vec<f32>,
    labels: Vec<usize>,
}

impl EncodedSet {
    pub fn new(hd_dim: usize, num_classes: usize, data: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        if hd_dim == 0 {
            return Err(Error::InvalidDimension("hd_dim must be positive".into()));
        }
        if data.len() != labels.len() * hd_dim {
            return Err(Error::mismatch(labels.len() * hd_dim, data.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Self { hd_dim, num_classes, data, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn hd_dim(&self) -> usize {
        self.hd_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn hv(&self, i: usize) -> &[f32] {
        &self.data[i * self.hd_dim..(i + 1) * self.hd_dim]
    }

    pub fn sample(&self, i: usize) -> (&[f32], usize) {
        (self.hv(i), self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f32], usize)> + '_ {
        self.data.chunks_exact(self.hd_dim).zip(self.labels.iter().copied())
    }

    /// Samples at the given indices, in that order.
    pub fn select<'a>(&'a self, idx: &'a [usize]) -> impl Iterator<Item = (&'a [f32], usize)> + 'a {
        idx.iter().map(move |&i| self.sample(i))
    }

    fn check_model(&self, model: &ClassPrototypes) -> Result<()> {
        if model.hd_dim() != self.hd_dim {
            return Err(Error::mismatch(model.hd_dim(), self.hd_dim));
        }
        if model.num_classes() < self.num_classes {
            return Err(Error::mismatch(self.num_classes, model.num_classes()));
        }
        Ok(())
    }

    pub fn predictions(&self, model: &ClassPrototypes, exec: Exec) -> Result<Vec<usize>> {
        self.check_model(model)?;
        let norms = model.norms();
        Ok(exec.map(self.len(), |i| model.predict_with_norms(&norms, self.hv(i))))
    }

    /// Fraction of correctly classified samples (0 for an empty set).
    pub fn accuracy(&self, model: &ClassPrototypes, exec: Exec) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        let preds = self.predictions(model, exec)?;
        let hits = preds.iter().zip(&self.labels).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / self.len() as f64)
    }

    /// Per-class accuracy; `None` for classes without samples.
    pub fn per_class_accuracy(&self, model: &ClassPrototypes, exec: Exec) -> Result<Vec<Option<f64>>> {
        let preds = self.predictions(model, exec)?;
        let mut hit = vec![0usize; self.num_classes];
        let mut tot = vec![0usize; self.num_classes];
        for (p, &l) in preds.iter().zip(&self.labels) {
            tot[l] += 1;
            if *p == l {
                hit[l] += 1;
            }
        }
        Ok(hit
            .into_iter()
            .zip(tot)
            .map(|(h, t)| (t > 0).then(|| h as f64 / t as f64))
            .collect())
    }

    /// Mean multi-class perceptron loss `max_k s_k - s_y` over cosine scores.
    /// Zero exactly when every sample is classified correctly.
    pub fn mean_loss(&self, model: &ClassPrototypes, exec: Exec) -> Result<f64> {
        self.check_model(model)?;
        if self.is_empty() {
            return Ok(0.0);
        }
        let norms = model.norms();
        let losses = exec.map(self.len(), |i| {
            let (scores, _) = model.scores_with_norms(&norms, self.hv(i));
            let best = argmax_lowest(&scores);
            scores[best] - scores[self.labels[i]]
        });
        Ok(losses.iter().sum::<f64>() / self.len() as f64)
    }
}
