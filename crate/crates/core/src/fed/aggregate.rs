use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

/// Running element-wise sum `Σ w_k M_k`, added in call order so that a
/// streamed and a batched aggregation agree bit for bit.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    num_classes: usize,
    hd_dim: usize,
    acc: Vec<f64>,
    counts: Vec<u64>,
}

impl Accumulator {
    pub fn new(num_classes: usize, hd_dim: usize) -> Self {
        Self { num_classes, hd_dim, acc: vec![0.0; num_classes * hd_dim], counts: vec![0; num_classes] }
    }

    pub fn add_values(&mut self, values: &[f64], weight: Option<f64>) -> Result<()> {
        if values.len() != self.acc.len() {
            return Err(Error::mismatch(self.acc.len(), values.len()));
        }
        match weight {
            Some(w) => self.acc.iter_mut().zip(values).for_each(|(a, v)| *a += w * v),
            None => self.acc.iter_mut().zip(values).for_each(|(a, v)| *a += v),
        }
        Ok(())
    }

    pub fn add(&mut self, m: &ClassPrototypes, weight: Option<f64>) -> Result<()> {
        if m.num_classes() != self.num_classes || m.hd_dim() != self.hd_dim {
            return Err(Error::mismatch(self.num_classes * self.hd_dim, m.num_classes() * m.hd_dim()));
        }
        self.add_values(m.as_slice(), weight)?;
        self.counts.iter_mut().zip(m.counts()).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.acc
    }

    pub fn finish(self) -> Result<ClassPrototypes> {
        ClassPrototypes::from_flat(self.num_classes, self.hd_dim, self.acc, self.counts)
    }
}

fn fold(models: &[ClassPrototypes], weights: Option<&[f64]>) -> Result<ClassPrototypes> {
    let first = models.first().ok_or(Error::Empty("aggregation needs at least one model"))?;
    let mut acc = Accumulator::new(first.num_classes(), first.hd_dim());
    for (i, m) in models.iter().enumerate() {
        acc.add(m, weights.map(|w| w[i]))?;
    }
    acc.finish()
}

/// `Σ p_k M_k`. Weights are used as given; pass them renormalized over the
/// participants.
pub fn aggregate_weighted(models: &[ClassPrototypes], weights: &[f64]) -> Result<ClassPrototypes> {
    if models.len() != weights.len() {
        return Err(Error::mismatch(models.len(), weights.len()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("aggregation weights must be finite and non-negative".into()));
    }
    fold(models, Some(weights))
}

/// Unweighted element-wise sum of client models.
pub fn aggregate_sum(models: &[ClassPrototypes]) -> Result<ClassPrototypes> {
    fold(models, None)
}
