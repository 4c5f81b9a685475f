//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut impl Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
}

fn distances(v: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = v.nrows();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..v.ncols() {
                s += (v[(i, k)] - v[(j, k)]).powi(2);
            }
            d[i][j] = s.sqrt();
        }
    }
    d
}

fn double_center(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = d.len();
    let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let col: Vec<f64> = (0..n).map(|j| d.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let all = row.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| (0..n).map(|j| d[i][j] - row[i] - col[j] + all).collect())
        .collect()
}

/// V-statistic distance covariance through explicit double centering.
pub fn dcov2_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let ca = double_center(&distances(a));
    let cb = double_center(&distances(b));
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ca[i][j] * cb[i][j];
        }
    }
    s / (n * n) as f64
}

pub fn dcor2_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let den = (dcov2_oracle(a, a) * dcov2_oracle(b, b)).sqrt();
    if den <= 1e-14 {
        0.0
    } else {
        dcov2_oracle(a, b) / den
    }
}

/// Inverse square root of an SPD matrix from its eigendecomposition.
pub fn inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// sqrt(trace(V)/d₂) with V = Σ₂^{-1/2} Σ₂₁ Σ₁⁻¹ Σ₁₂ Σ₂^{-1/2}.
pub fn trace_corr_oracle(b1: &DMatrix<f64>, b2: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let s1 = b1.transpose() * sigma * b1;
    let s2 = b2.transpose() * sigma * b2;
    let s12 = b1.transpose() * sigma * b2;
    let s1_inv = s1.try_inverse().expect("invertible");
    let h = inv_sqrt(&s2);
    let v = &h * s12.transpose() * s1_inv * &s12 * &h;
    (v.trace() / b2.ncols() as f64).sqrt()
}

/// Orthogonal projector onto the column span, via QR.
pub fn projector(b: &DMatrix<f64>) -> DMatrix<f64> {
    let q = b.clone().qr().q();
    let q = q.columns(0, b.ncols()).into_owned();
    &q * q.transpose()
}

pub fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
