//! Subspace recovery scores.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};
use crate::linalg::orthonormal_columns;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceScore {
    pub rho: f64,
    pub frob_dist: f64,
    pub dims: (usize, usize),
}

impl SubspaceScore {
    pub fn compute(b_est: &DMatrix<f64>, b_true: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        Ok(SubspaceScore {
            rho: trace_correlation(b_est, b_true, sigma)?,
            frob_dist: projection_distance(b_est, b_true)?,
            dims: (b_est.ncols(), b_true.ncols()),
        })
    }
}

fn check_shapes(b_est: &DMatrix<f64>, b_true: &DMatrix<f64>) -> Result<()> {
    if b_est.nrows() != b_true.nrows() {
        return Err(SdrError::Dimension(format!(
            "bases live in different spaces ({} vs {} rows)",
            b_est.nrows(),
            b_true.nrows()
        )));
    }
    if b_est.ncols() == 0 || b_true.ncols() == 0 {
        return Err(SdrError::Metric("empty basis".into()));
    }
    Ok(())
}

/// Trace correlation `sqrt(trace(V)/d₂)` of `B̃ᵀX` and `BᵀX` under covariance Σ.
///
/// `trace(V) = trace(Σ₂^{-1/2} Σ₁₂ᵀ Σ₁⁻¹ Σ₁₂ Σ₂^{-1/2}) = trace(Σ₁⁻¹ Σ₁₂ Σ₂⁻¹ Σ₁₂ᵀ)`,
/// evaluated with Cholesky solves.
pub fn trace_correlation(b_est: &DMatrix<f64>, b_true: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    check_shapes(b_est, b_true)?;
    if sigma.nrows() != b_est.nrows() || !sigma.is_square() {
        return Err(SdrError::Dimension("covariance does not match bases".into()));
    }
    let s_b1 = sigma * b_est;
    let s1 = b_est.tr_mul(&s_b1);
    let s2 = b_true.tr_mul(&(sigma * b_true));
    let s12 = s_b1.tr_mul(b_true);
    let c1 = s1
        .cholesky()
        .ok_or_else(|| SdrError::Metric("estimated projection has singular covariance".into()))?;
    let c2 = s2
        .cholesky()
        .ok_or_else(|| SdrError::Metric("true projection has singular covariance".into()))?;
    // Σ₁⁻¹Σ₁₂ and Σ₂⁻¹Σ₁₂ᵀ
    let a = c1.solve(&s12);
    let b = c2.solve(&s12.transpose());
    let tr = (a * b).trace();
    let d2 = b_true.ncols() as f64;
    Ok((tr.max(0.0) / d2).sqrt())
}

/// Frobenius norm of the difference of the orthogonal projectors onto the
/// two column spans.
pub fn projection_distance(b_est: &DMatrix<f64>, b_true: &DMatrix<f64>) -> Result<f64> {
    check_shapes(b_est, b_true)?;
    let q1 = orthonormal_columns(b_est)?;
    let q2 = orthonormal_columns(b_true)?;
    // ‖P₁ − P₂‖²_F = d₁ + d₂ − 2‖Q₁ᵀQ₂‖²_F
    let cross = q1.tr_mul(&q2).norm_squared();
    let sq = q1.ncols() as f64 + q2.ncols() as f64 - 2.0 * cross;
    Ok(sq.max(0.0).sqrt())
}
