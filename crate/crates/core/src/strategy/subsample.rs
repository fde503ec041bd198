use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

/// Positions (flat row-major indices, increasing) and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Number of kept positions out of `total` at keep-fraction `rate`.
pub fn subsample_count(total: usize, rate: f64) -> usize {
    ((rate * total as f64).round() as usize).clamp(1, total.max(1))
}

/// Uniform random subset of `round(rate * total)` positions, sorted.
pub fn subsample_indices<R: Rng + ?Sized>(total: usize, rate: f64, rng: &mut R) -> Result<Vec<usize>> {
    check_rate(rate)?;
    let n = subsample_count(total, rate);
    if n >= total {
        return Ok((0..total).collect());
    }
    let mut idx = index::sample(rng, total, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

pub fn subsample<R: Rng + ?Sized>(model: &ClassPrototypes, rate: f64, rng: &mut R) -> Result<Subsample> {
    let w = model.as_slice();
    let indices = subsample_indices(w.len(), rate, rng)?;
    let values = indices.iter().map(|&i| w[i]).collect();
    Ok(Subsample { indices, values })
}

/// Running per-position sums and report counts.
#[derive(Debug, Clone)]
pub(crate) struct SubsampleSums {
    sum: Vec<f64>,
    hits: Vec<u32>,
}

impl SubsampleSums {
    pub fn new(total: usize) -> Self {
        Self { sum: vec![0.0; total], hits: vec![0; total] }
    }

    pub fn add(&mut self, s: &Subsample) -> Result<()> {
        if s.indices.len() != s.values.len() {
            return Err(Error::mismatch(s.indices.len(), s.values.len()));
        }
        let total = self.sum.len();
        if let Some(&i) = s.indices.iter().find(|&&i| i >= total) {
            return Err(Error::InvalidArgument(format!("position {i} outside model of {total}")));
        }
        for (&i, &v) in s.indices.iter().zip(&s.values) {
            self.sum[i] += v;
            self.hits[i] += 1;
        }
        Ok(())
    }

    pub fn finish(&self, previous: &ClassPrototypes) -> Result<ClassPrototypes> {
        if previous.as_slice().len() != self.sum.len() {
            return Err(Error::mismatch(self.sum.len(), previous.as_slice().len()));
        }
        let mut out = previous.clone();
        for ((w, s), &h) in out.as_mut_slice().iter_mut().zip(&self.sum).zip(&self.hits) {
            if h > 0 {
                *w = s / h as f64;
            }
        }
        Ok(out)
    }
}

/// Per position, the mean over clients that reported it; positions nobody
/// reported keep their value from `previous`.
pub fn subsample_aggregate(previous: &ClassPrototypes, samples: &[Subsample]) -> Result<ClassPrototypes> {
    let mut sums = SubsampleSums::new(previous.as_slice().len());
    for s in samples {
        sums.add(s)?;
    }
    sums.finish(previous)
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("subsample rate {rate} outside (0, 1]")))
    }
}
