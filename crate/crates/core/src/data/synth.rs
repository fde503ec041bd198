use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

use super::Dataset;

/// `K` Gaussian classes with means on a sphere of radius `separation`.
/// The shared covariance is the identity plus an optional low-rank nuisance
/// part (see [`GaussianMixture::with_nuisance`]).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    num_classes: usize,
    input_dim: usize,
    means: Vec<f64>,
    nuisance: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(k: usize, m: usize, separation: f64, seed: u64) -> Result<Self> {
        check(k, m)?;
        let mut rng = rng_from(seed, &[stream::SYNTH_MEANS, k as u64, m as u64]);
        let mut means = Vec::with_capacity(k * m);
        for _ in 0..k {
            loop {
                let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 {
                    means.extend(v.iter().map(|x| x / n * separation));
                    break;
                }
            }
        }
        Ok(Self { num_classes: k, input_dim: m, means, nuisance: Vec::new() })
    }

    /// Adds `rank` random unit directions of standard deviation `scale` to the
    /// shared covariance. Nearest-mean classifiers degrade as `scale` grows
    /// while the Bayes-optimal linear rule does not, so retraining has
    /// something to learn.
    pub fn with_nuisance(mut self, rank: usize, scale: f64, seed: u64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidArgument(format!("nuisance scale must be finite and non-negative, got {scale}")));
        }
        let m = self.input_dim;
        let mut rng = rng_from(seed, &[stream::SYNTH_MEANS, u64::MAX, rank as u64, m as u64]);
        self.nuisance = Vec::with_capacity(rank * m);
        for _ in 0..rank {
            let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            self.nuisance.extend(v.iter().map(|x| x / n * scale));
        }
        Ok(self)
    }

    /// Two classes at `+µ` and `-µ` with `‖µ‖ = separation`.
    pub fn symmetric(m: usize, separation: f64, seed: u64) -> Result<Self> {
        let mut g = Self::new(2, m, separation, seed)?;
        for j in 0..m {
            g.means[m + j] = -g.means[j];
        }
        Ok(g)
    }

    pub fn from_means(means: Vec<Vec<f64>>) -> Result<Self> {
        let k = means.len();
        let m = means.first().map_or(0, Vec::len);
        check(k, m)?;
        if let Some(bad) = means.iter().find(|r| r.len() != m) {
            return Err(Error::mismatch(m, bad.len()));
        }
        Ok(Self { num_classes: k, input_dim: m, means: means.concat(), nuisance: Vec::new() })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.input_dim..(k + 1) * self.input_dim]
    }

    /// Draws exactly `n_per_class` samples per class, labels interleaved
    /// `0, 1, .., K-1, 0, 1, ..`.
    pub fn sample(&self, n_per_class: usize, seed: u64) -> Result<Dataset> {
        let (k, m) = (self.num_classes, self.input_dim);
        let n = n_per_class * k;
        let mut rng = rng_from(seed, &[stream::SYNTH_SAMPLES, k as u64, m as u64]);
        let mut features = Vec::with_capacity(n * m);
        let mut labels = Vec::with_capacity(n);
        let mut x = vec![0.0; m];
        for i in 0..n {
            let c = i % k;
            labels.push(c);
            for (xj, &mu) in x.iter_mut().zip(self.mean(c)) {
                let z: f64 = rng.sample(StandardNormal);
                *xj = mu + z;
            }
            for u in self.nuisance.chunks_exact(m) {
                let g: f64 = rng.sample(StandardNormal);
                x.iter_mut().zip(u).for_each(|(xj, uj)| *xj += g * uj);
            }
            features.extend(x.iter().map(|&v| v as f32));
        }
        Dataset::new(features, labels, m, k)
    }
}

fn check(k: usize, m: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {k}")));
    }
    if m < 1 {
        return Err(Error::InvalidDimension("need at least one feature".into()));
    }
    Ok(())
}

pub fn synth_gaussian_mixture(k: usize, m: usize, n_per_class: usize, separation: f64, seed: u64) -> Result<Dataset> {
    GaussianMixture::new(k, m, separation, seed)?.sample(n_per_class, seed)
}
