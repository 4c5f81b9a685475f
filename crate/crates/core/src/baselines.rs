//! Comparison estimators sharing the envelope-size interface.

use nalgebra::DMatrix;

use crate::data::{sample_covariance, Dataset};
use crate::error::{Result, SdrError};
use crate::kernel::{leading_basis, IrpConfig, IrpSdr, SdrFit};
use crate::linalg::sym_eigen_desc;
use crate::sir::sir_directions;

/// Top-`u` principal directions of Σ̂ as a p × u matrix with orthonormal
/// columns. Uses the n × n Gram matrix when n < p.
pub fn principal_directions(d: &Dataset, u: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (d.n(), d.p());
    if u == 0 || u > p.min(n) {
        return Err(SdrError::Parameter(format!(
            "cannot take {u} principal directions from n={n}, p={p}"
        )));
    }
    if n < p {
        let x = d.x();
        let gram = x * x.transpose() / n as f64;
        let (vals, vecs) = sym_eigen_desc(&gram);
        let top = vals[0].max(0.0);
        let mut e = DMatrix::zeros(p, u);
        for i in 0..u {
            let s = vals[i];
            if !(s > 1e-12 * top) {
                return Err(SdrError::Numerical(format!(
                    "only {i} nonzero principal components available, {u} requested"
                )));
            }
            let col = x.tr_mul(&vecs.column(i)) / (n as f64 * s).sqrt();
            e.set_column(i, &col);
        }
        Ok(e)
    } else {
        let sigma = sample_covariance(d);
        let (_, vecs) = sym_eigen_desc(sigma.sigma_hat());
        Ok(vecs.columns(0, u).into_owned())
    }
}

/// SIR inside the span of the leading `u` principal directions; the basis is
/// the leading `dim` mapped-back directions, orthonormalized.
pub fn pca_sdr(d: &Dataset, u: usize, slices: usize, dim: usize) -> Result<SdrFit> {
    if u >= d.n() {
        return Err(SdrError::Parameter(format!(
            "envelope size u={u} must be below n={}",
            d.n()
        )));
    }
    if dim == 0 || dim > u {
        return Err(SdrError::Parameter(format!(
            "basis dimension {dim} must lie in 1..={u}"
        )));
    }
    let e = principal_directions(d, u)?;
    let z = d.x() * &e;
    let sir = sir_directions(d.y().as_slice(), &z, slices)?;
    let mapped = &e * sir.gammas.columns(0, dim);
    let basis = crate::linalg::orthonormal_columns(&mapped)
        .map_err(|e| SdrError::Numerical(format!("PCA-SDR basis: {e}")))?;
    Ok(SdrFit {
        basis,
        spectrum: sir.lambdas.iter().copied().collect(),
        d_hat: dim,
        criterion_values: None,
        warnings: Vec::new(),
        config_echo: serde_json::Value::Null,
    })
}

/// Marginal screening: `K_{u,1}` from single-covariate distance correlations.
pub fn marginal_r1(d: &Dataset, u: usize, slices: usize, dim: usize) -> Result<SdrFit> {
    let est = IrpSdr::new(
        d,
        IrpConfig {
            slices,
            partitions: 1,
            seed: 0,
        },
    )?;
    leading_basis(&est.integrate_partitions(u, 1)?, dim)
}
