//! Sliced inverse regression on a reduced covariate matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SdrError};
use crate::linalg::sym_eigen_desc;

/// Relative ridge added to the reduced covariance before factorization.
pub const RIDGE: f64 = 1e-8;

/// Default number of slices.
pub const DEFAULT_SLICES: usize = 5;

/// Slice membership of each sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceLabels {
    pub labels: Vec<usize>,
    pub count: usize,
}

impl SliceLabels {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Labels restricted to a subset of samples, renumbered to stay contiguous.
    pub fn subset(&self, rows: &[usize]) -> SliceLabels {
        let mut remap = vec![usize::MAX; self.count];
        let mut next = 0;
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            let l = self.labels[i];
            if remap[l] == usize::MAX {
                remap[l] = next;
                next += 1;
            }
            labels.push(remap[l]);
        }
        SliceLabels { labels, count: next }
    }
}

/// Assigns samples to `h` slices of (nearly) equal size after a stable sort
/// by `y`; the first `n mod h` slices get one extra sample. A response with
/// fewer than `h` distinct values is sliced by value instead.
pub fn slice_assign(y: &[f64], h: usize) -> Result<SliceLabels> {
    let n = y.len();
    if h < 2 {
        return Err(SdrError::Parameter(format!("need at least 2 slices, got {h}")));
    }
    if h > n {
        return Err(SdrError::Parameter(format!(
            "{h} slices requested for {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));

    let mut distinct = 1;
    for w in order.windows(2) {
        if y[w[0]] != y[w[1]] {
            distinct += 1;
        }
    }

    let mut labels = vec![0; n];
    if distinct < h {
        let mut slice = 0;
        for (k, &i) in order.iter().enumerate() {
            if k > 0 && y[i] != y[order[k - 1]] {
                slice += 1;
            }
            labels[i] = slice;
        }
        return Ok(SliceLabels {
            labels,
            count: distinct,
        });
    }

    let base = n / h;
    let extra = n % h;
    let mut pos = 0;
    for slice in 0..h {
        let size = base + usize::from(slice < extra);
        for &i in &order[pos..pos + size] {
            labels[i] = slice;
        }
        pos += size;
    }
    Ok(SliceLabels { labels, count: h })
}

/// Per-slice means scaled by sqrt(n_h / n), one row per slice.
///
/// `M̂ = CᵀC` for the returned matrix `C`.
fn weighted_slice_means(z: &DMatrix<f64>, labels: &SliceLabels) -> Result<DMatrix<f64>> {
    let (n, u) = z.shape();
    if labels.labels.len() != n {
        return Err(SdrError::Dimension(format!(
            "{} slice labels for {n} samples",
            labels.labels.len()
        )));
    }
    let mut sums = DMatrix::zeros(labels.count, u);
    let mut counts = vec![0usize; labels.count];
    for (i, &l) in labels.labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..u {
            sums[(l, j)] += z[(i, j)];
        }
    }
    for (h, &c) in counts.iter().enumerate() {
        assert!(c > 0, "slice {h} is empty");
        let w = (c as f64 / n as f64).sqrt() / c as f64;
        sums.row_mut(h).scale_mut(w);
    }
    Ok(sums)
}

/// `M̂ = Σ_h (n_h/n)·m̄_h·m̄_hᵀ` over slice means of the centered `z`.
pub fn sir_kernel(z: &DMatrix<f64>, labels: &SliceLabels) -> Result<DMatrix<f64>> {
    let c = weighted_slice_means(z, labels)?;
    let mut m = c.tr_mul(&c);
    crate::linalg::symmetrize_upper(&mut m);
    Ok(m)
}

/// SIR eigenpairs in reduced coordinates.
#[derive(Debug, Clone)]
pub struct SirResult {
    /// Columns γⱼ, ordered by descending eigenvalue, scaled so γⱼᵀΣ̂ₑγⱼ = 1.
    pub gammas: DMatrix<f64>,
    pub lambdas: DVector<f64>,
    pub slices: usize,
}

/// Solves `Σ̂ₑ⁻¹ M̂ γ = λ γ` for the centered reduced matrix `z`.
pub fn sir_directions(y: &[f64], z: &DMatrix<f64>, h: usize) -> Result<SirResult> {
    let labels = slice_assign(y, h)?;
    sir_directions_with_labels(z, &labels)
}

/// As [`sir_directions`] with precomputed slices.
///
/// The reduced covariance gets a relative ridge of [`RIDGE`] and is factored
/// as `LLᵀ`; the symmetric problem `L⁻¹M̂L⁻ᵀ η = λη` has the same spectrum and
/// `γ = L⁻ᵀη`.
pub fn sir_directions_with_labels(z: &DMatrix<f64>, labels: &SliceLabels) -> Result<SirResult> {
    let (n, u) = z.shape();
    if u == 0 {
        return Err(SdrError::Parameter("SIR on an empty covariate set".into()));
    }
    if u >= n {
        return Err(SdrError::Parameter(format!(
            "SIR needs fewer covariates than samples (u={u}, n={n})"
        )));
    }
    let mut sigma = z.tr_mul(z) / n as f64;
    crate::linalg::symmetrize_upper(&mut sigma);
    let mean_diag = sigma.trace() / u as f64;
    if !(mean_diag.is_finite() && mean_diag > 0.0) {
        return Err(SdrError::Numerical(
            "reduced covariance is zero or non-finite".into(),
        ));
    }
    let mut guarded = sigma.clone();
    for k in 0..u {
        guarded[(k, k)] += RIDGE * mean_diag;
    }
    let chol = guarded.cholesky().ok_or_else(|| {
        SdrError::Numerical("reduced covariance is not positive definite after ridge".into())
    })?;
    let l = chol.l();

    let c = weighted_slice_means(z, labels)?;
    // Gᵀ = L⁻¹Cᵀ, whitened kernel = GᵀG
    let gt = l
        .solve_lower_triangular(&c.transpose())
        .ok_or_else(|| SdrError::Numerical("singular Cholesky factor".into()))?;
    let whitened = &gt * gt.transpose();
    let (vals, etas) = sym_eigen_desc(&whitened);
    let mut gammas = l
        .transpose()
        .solve_upper_triangular(&etas)
        .ok_or_else(|| SdrError::Numerical("singular Cholesky factor".into()))?;

    for j in 0..u {
        let g = gammas.column(j).into_owned();
        let q = (&sigma * &g).dot(&g);
        // directions inside a collinear subspace keep the ridge normalization
        if q > 0.5 {
            gammas.column_mut(j).scale_mut(1.0 / q.sqrt());
        }
    }
    let lambdas = vals.map(|v| v.max(0.0));
    if lambdas.iter().any(|v| !v.is_finite()) || gammas.iter().any(|v| !v.is_finite()) {
        return Err(SdrError::Numerical("non-finite SIR eigenpairs".into()));
    }
    Ok(SirResult {
        gammas,
        lambdas,
        slices: labels.count,
    })
}
