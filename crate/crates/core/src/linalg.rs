//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SdrError};

/// Copies the upper triangle onto the lower one.
pub fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
///
/// The input is averaged with its transpose first, so slightly asymmetric
/// round-off does not leak into the solver.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Orthonormal basis for the column span of `m` (Householder QR).
///
/// Fails when a column is numerically dependent on the previous ones.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, d) = m.shape();
    if d == 0 || d > p {
        return Err(SdrError::Dimension(format!(
            "cannot orthonormalize a {p}x{d} matrix"
        )));
    }
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let qr = m.clone().qr();
    let r = qr.r();
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * (p as f64);
    for k in 0..d {
        if !(r[(k, k)].abs() > tol) {
            return Err(SdrError::Metric(format!(
                "basis is rank deficient (column {k})"
            )));
        }
    }
    Ok(qr.q())
}

/// Symmetric inverse square root of a positive definite matrix.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(m);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        if !(v > 1e-13 * top.max(f64::MIN_POSITIVE)) {
            return Err(SdrError::Metric(
                "matrix is not positive definite".to_string(),
            ));
        }
        scaled.column_mut(k).scale_mut(1.0 / v.sqrt());
    }
    Ok(&scaled * vecs.transpose())
}

/// Symmetric square root of a positive semidefinite matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_desc(m);
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v.max(0.0).sqrt());
    }
    let mut out = &scaled * vecs.transpose();
    let sym = (&out + out.transpose()) * 0.5;
    out.copy_from(&sym);
    out
}

/// Serde adapter: a matrix as a row-major array of rows.
pub mod row_major {
    use nalgebra::DMatrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_eq!(vals.as_slice(), &[5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_square_root_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let w = inv_sqrt_spd(&m).unwrap();
        let id = &w * &m * &w;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
        let s = sqrt_psd(&m);
        assert!((&s * &s - &m).norm() < 1e-12);
    }

    #[test]
    fn dependent_columns_rejected() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(orthonormal_columns(&m).is_err());
    }
}
