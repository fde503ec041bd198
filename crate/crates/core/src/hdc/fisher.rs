//! Fisher linear discriminant, used as a reference for one-shot training.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RIDGE: f64 = 1e-8;

/// `(Σ_1 + Σ_-1)^-1 (µ_1 - µ_-1)`.
///
/// Solved by Cholesky. A numerically singular scatter matrix is retried once
/// with `1e-8·I` added; if that also fails the matrix is reported singular.
pub fn fisher_direction(means: [&[f64]; 2], covs: [&[Vec<f64>]; 2]) -> Result<Vec<f64>> {
    let d = means[0].len();
    if means[1].len() != d {
        return Err(Error::mismatch(d, means[1].len()));
    }
    for cov in covs {
        if cov.len() != d {
            return Err(Error::mismatch(d, cov.len()));
        }
        if let Some(r) = cov.iter().find(|r| r.len() != d) {
            return Err(Error::mismatch(d, r.len()));
        }
    }
    let scatter = DMatrix::from_fn(d, d, |i, j| covs[0][i][j] + covs[1][i][j]);
    let diff = DVector::from_iterator(d, means[0].iter().zip(means[1]).map(|(a, b)| a - b));

    let chol = scatter
        .clone()
        .cholesky()
        .or_else(|| (scatter + DMatrix::identity(d, d) * RIDGE).cholesky())
        .ok_or(Error::SingularMatrix)?;
    let w = chol.solve(&diff);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    Ok(w.iter().copied().collect())
}

/// `+1` if `⟨direction, h⟩ > 0`, `-1` if negative, `0` on the boundary.
pub fn fisher_decision(direction: &[f64], h: &[f32]) -> i8 {
    let z = super::dot(direction, h);
    if z > 0.0 {
        1
    } else if z < 0.0 {
        -1
    } else {
        0
    }
}
