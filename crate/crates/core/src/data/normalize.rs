use super::Dataset;

/// Per-feature mean and standard deviation, fitted on a training split and
/// applied unchanged to any other split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Self {
        let m = ds.input_dim();
        let n = ds.len() as f64;
        let mut mean = vec![0.0f64; m];
        for i in 0..ds.len() {
            mean.iter_mut().zip(ds.row(i)).for_each(|(a, &x)| *a += x as f64);
        }
        mean.iter_mut().for_each(|a| *a /= n);
        let mut var = vec![0.0f64; m];
        for i in 0..ds.len() {
            for ((v, &x), mu) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
                let dx = x as f64 - mu;
                *v += dx * dx;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Standardizer { mean, std }
    }

    /// Constant features (zero spread) map to 0.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        let m = self.mean.len();
        for row in out.features_mut().chunks_exact_mut(m) {
            for ((x, mu), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = if *sd > 0.0 { ((*x as f64 - mu) / sd) as f32 } else { 0.0 };
            }
        }
        out
    }
}

/// Standardizes `ds` with its own statistics. For held-out data, fit a
/// [`Standardizer`] on the training split and apply it instead.
pub fn normalize_features(ds: &Dataset) -> Dataset {
    Standardizer::fit(ds).apply(ds)
}
