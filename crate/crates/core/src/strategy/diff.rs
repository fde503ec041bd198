use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

/// `K x d` matrix of update signs. Entries are exactly `±1` when produced by
/// [`diff_binarize`]; after a noisy uplink they may be arbitrary reals, and an
/// erased entry is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMatrix {
    num_classes: usize,
    hd_dim: usize,
    values: Vec<f64>,
}

impl SignMatrix {
    pub fn new(num_classes: usize, hd_dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_classes * hd_dim {
            return Err(Error::mismatch(num_classes * hd_dim, values.len()));
        }
        Ok(Self { num_classes, hd_dim, values })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hd_dim(&self) -> usize {
        self.hd_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Element-wise `sign(new - old)` with `sign(0) = +1`.
pub fn diff_binarize(new: &ClassPrototypes, old: &ClassPrototypes) -> Result<SignMatrix> {
    new.ensure_same_shape(old)?;
    let values = new
        .as_slice()
        .iter()
        .zip(old.as_slice())
        .map(|(a, b)| if a - b >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    SignMatrix::new(new.num_classes(), new.hd_dim(), values)
}

/// `C + step * Σ_k S_k`. An empty list returns `global` unchanged.
pub fn diff_apply(global: &ClassPrototypes, signs: &[SignMatrix], step: f64) -> Result<ClassPrototypes> {
    let mut out = global.clone();
    let k = global.num_classes();
    let d = global.hd_dim();
    let mut acc = vec![0.0f64; k * d];
    for s in signs {
        if s.num_classes != k || s.hd_dim != d {
            return Err(Error::mismatch(k * d, s.num_classes * s.hd_dim));
        }
        acc.iter_mut().zip(&s.values).for_each(|(a, v)| *a += v);
    }
    if !signs.is_empty() {
        out.as_mut_slice().iter_mut().zip(&acc).for_each(|(w, a)| *w += step * a);
    }
    Ok(out)
}
