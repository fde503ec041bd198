//! Two-class view of retraining: a single weight vector `w = c_0 - c_1`
//! updated perceptron-style, plus the loss whose stochastic subgradient steps
//! reproduce it.
//!
//! Labels are `+1` for class 0 and `-1` for class 1.

use crate::error::{Error, Result};

use super::prototypes::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryWeight(pub Vec<f64>);

impl BinaryWeight {
    pub fn zeros(d: usize) -> Self {
        BinaryWeight(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `c_0 - c_1` of a two-class model.
    pub fn from_prototypes(p: &super::ClassPrototypes) -> Result<Self> {
        if p.num_classes() != 2 {
            return Err(Error::InvalidArgument(format!("expected 2 classes, got {}", p.num_classes())));
        }
        Ok(BinaryWeight(p.row(0).iter().zip(p.row(1)).map(|(a, b)| a - b).collect()))
    }
}

fn check(w: &BinaryWeight, h: &[f32], y: i8) -> Result<f64> {
    if h.len() != w.len() {
        return Err(Error::mismatch(w.len(), h.len()));
    }
    match y {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::InvalidArgument(format!("binary label must be ±1, got {y}"))),
    }
}

/// `passes` sweeps over `samples` in order. Whenever `y⟨w,h⟩ ≤ 0` the weight
/// moves by `eta·y·h`; the non-strict test lets training leave `w = 0`.
pub fn binary_retrain(mut w: BinaryWeight, samples: &[(&[f32], i8)], eta: f64, passes: usize) -> Result<BinaryWeight> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {eta}")));
    }
    for _ in 0..passes {
        for &(h, y) in samples {
            let yf = check(&w, h, y)?;
            if yf * dot(&w.0, h) <= 0.0 {
                w.0.iter_mut().zip(h).for_each(|(wi, &hi)| *wi += eta * (yf * hi as f64));
            }
        }
    }
    Ok(w)
}

/// Number of samples with `y⟨w,h⟩ ≤ 0`.
pub fn binary_mistakes(w: &BinaryWeight, samples: &[(&[f32], i8)]) -> Result<usize> {
    let mut n = 0;
    for &(h, y) in samples {
        if check(w, h, y)? * dot(&w.0, h) <= 0.0 {
            n += 1;
        }
    }
    Ok(n)
}

/// `max(0, -y⟨w,h⟩)`: zero when the sign of `⟨w,h⟩` agrees with `y`, the
/// size of the violation otherwise.
pub fn perceptron_loss(w: &BinaryWeight, h: &[f32], y: i8) -> Result<f64> {
    let yf = check(w, h, y)?;
    Ok((-yf * dot(&w.0, h)).max(0.0))
}

/// Subgradient of [`perceptron_loss`] with respect to `w`: `-y·h` when
/// `y⟨w,h⟩ ≤ 0` (the kink at zero takes the violating branch), else zero.
pub fn perceptron_subgradient(w: &BinaryWeight, h: &[f32], y: i8) -> Result<Vec<f64>> {
    let yf = check(w, h, y)?;
    Ok(if yf * dot(&w.0, h) <= 0.0 {
        h.iter().map(|&hi| -(yf * hi as f64)).collect()
    } else {
        vec![0.0; h.len()]
    })
}

/// Plain SGD on [`perceptron_loss`]: `w ← w - eta·∇ℓ` per sample, in order.
pub fn sgd_perceptron(mut w: BinaryWeight, samples: &[(&[f32], i8)], eta: f64, passes: usize) -> Result<BinaryWeight> {
    for _ in 0..passes {
        for &(h, y) in samples {
            let g = perceptron_subgradient(&w, h, y)?;
            w.0.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= eta * gi);
        }
    }
    Ok(w)
}
