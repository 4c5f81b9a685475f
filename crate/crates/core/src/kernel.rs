//! Sketch kernels, their integration across random partitions, block sizes
//! and envelope sizes, and extraction of the final basis.
//!
//! Every kernel here has the form `K = G·Σ̂` with `G = Σ wⱼ βⱼβⱼᵀ` symmetric
//! positive semidefinite. The factor `G` is carried alongside the dense `K`
//! so that eigenvectors of the (non-symmetric) `K` can be computed exactly
//! through a symmetric problem of size min(n, p).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_covariance, CovarianceEstimate, Dataset};
use crate::dcor::ResponseDistances;
use crate::error::{Result, SdrError};
use crate::linalg::{row_major, sym_eigen_desc};
use crate::partition::{candidate_sizes, random_partition, screen_with, EnvelopeSelection};
use crate::rng::Substream;
use crate::sir::{sir_directions_with_labels, slice_assign, SirResult, SliceLabels, DEFAULT_SLICES};

/// Default number of random partitions per (u, r) cell.
pub const DEFAULT_PARTITIONS: usize = 50;

/// Traces at or below this are treated as an empty kernel.
pub const DEGENERATE_TRACE: f64 = 1e-12;

const RANK_TOL: f64 = 1e-10;

/// `K = Σⱼ λⱼ βⱼβⱼᵀ Σ̂` for one partition, kept in factored form.
#[derive(Debug, Clone)]
pub struct SketchKernel {
    /// u × u SIR directions; row k belongs to covariate `selection.indices[k]`.
    pub gammas: DMatrix<f64>,
    pub lambdas: DVector<f64>,
    pub selection: EnvelopeSelection,
    pub p: usize,
}

impl SketchKernel {
    /// p × u; column j is γⱼ embedded at the selected indices, zero elsewhere.
    pub fn betas(&self) -> DMatrix<f64> {
        let mut betas = DMatrix::zeros(self.p, self.gammas.ncols());
        for (row, &idx) in self.selection.indices.iter().enumerate() {
            betas.row_mut(idx).copy_from(&self.gammas.row(row));
        }
        betas
    }

    /// Dense `Σⱼ λⱼ βⱼ(Σ̂βⱼ)ᵀ`.
    pub fn materialize(&self, sigma: &CovarianceEstimate) -> DMatrix<f64> {
        let betas = self.betas();
        let sb = sigma.sigma_hat() * &betas;
        let mut weighted = betas;
        for (j, &l) in self.lambdas.iter().enumerate() {
            weighted.column_mut(j).scale_mut(l);
        }
        weighted * sb.transpose()
    }

    /// `K·v` without forming `K`.
    pub fn apply(&self, sigma: &CovarianceEstimate, v: &DVector<f64>) -> DVector<f64> {
        let sv = sigma.sigma_hat() * v;
        let betas = self.betas();
        let coef = betas.tr_mul(&sv).component_mul(&self.lambdas);
        betas * coef
    }
}

/// Embeds the reduced SIR directions back into ℝᵖ.
pub fn sketch_kernel(
    sir: &SirResult,
    sel: &EnvelopeSelection,
    sigma: &CovarianceEstimate,
) -> Result<SketchKernel> {
    let p = sigma.p();
    let u = sel.indices.len();
    if sir.gammas.nrows() != u {
        return Err(SdrError::Dimension(format!(
            "SIR directions have {} rows but the selection has {u} indices",
            sir.gammas.nrows()
        )));
    }
    if let Some(&bad) = sel.indices.iter().find(|&&i| i >= p) {
        return Err(SdrError::Dimension(format!(
            "selected index {bad} out of range for p={p}"
        )));
    }
    Ok(SketchKernel {
        gammas: sir.gammas.clone(),
        p,
        lambdas: sir.lambdas.clone(),
        selection: sel.clone(),
    })
}

/// One (u, r) cell of an integration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub u: usize,
    pub r: usize,
    pub requested: usize,
    pub used: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub slices: usize,
    pub cells: Vec<CellRecord>,
}

impl Provenance {
    pub fn u_values(&self) -> Vec<usize> {
        let mut us: Vec<usize> = self.cells.iter().map(|c| c.u).collect();
        us.dedup();
        us
    }

    pub fn r_values(&self, u: usize) -> Vec<usize> {
        self.cells.iter().filter(|c| c.u == u).map(|c| c.r).collect()
    }
}

/// Trace normalizer of one envelope size in an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub u: usize,
    pub m_u: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone)]
struct KernelFactor {
    left: DMatrix<f64>,
    root: Arc<DMatrix<f64>>,
}

/// An integrated kernel estimate in ambient coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratedKernel {
    #[serde(with = "row_major")]
    pub k_matrix: DMatrix<f64>,
    pub provenance: Provenance,
    #[serde(default)]
    pub trace_m: Vec<Normalizer>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(skip)]
    factor: Option<KernelFactor>,
}

impl IntegratedKernel {
    /// Wraps a plain matrix; its basis is taken from the symmetrized matrix.
    pub fn from_matrix(k_matrix: DMatrix<f64>) -> Self {
        IntegratedKernel {
            k_matrix,
            provenance: Provenance::default(),
            trace_m: Vec::new(),
            warnings: Vec::new(),
            factor: None,
        }
    }

    /// Builds `K = G·Σ̂` from a symmetric factor `G`.
    pub fn from_factor(left: DMatrix<f64>, sigma: &CovarianceEstimate) -> Self {
        let k_matrix = &left * sigma.sigma_hat();
        IntegratedKernel {
            k_matrix,
            provenance: Provenance::default(),
            trace_m: Vec::new(),
            warnings: Vec::new(),
            factor: Some(KernelFactor {
                left,
                root: Arc::new(sigma.root().clone()),
            }),
        }
    }

    pub fn p(&self) -> usize {
        self.k_matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.k_matrix.trace()
    }

    /// The symmetric factor `G`, when known.
    pub fn left_factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref().map(|f| &f.left)
    }

    fn zeros_like(&self) -> Self {
        let p = self.p();
        IntegratedKernel {
            k_matrix: DMatrix::zeros(p, p),
            provenance: Provenance {
                master_seed: self.provenance.master_seed,
                slices: self.provenance.slices,
                cells: Vec::new(),
            },
            trace_m: Vec::new(),
            warnings: Vec::new(),
            factor: self.factor.as_ref().map(|f| KernelFactor {
                left: DMatrix::zeros(p, p),
                root: Arc::clone(&f.root),
            }),
        }
    }

    /// `self += scale·other`, merging provenance.
    fn add_scaled(&mut self, other: &IntegratedKernel, scale: f64) {
        self.k_matrix += &other.k_matrix * scale;
        match (&mut self.factor, &other.factor) {
            (Some(a), Some(b)) => a.left += &b.left * scale,
            _ => self.factor = None,
        }
        self.provenance.cells.extend(other.provenance.cells.iter().cloned());
        self.warnings.extend(other.warnings.iter().cloned());
    }
}

/// Iteration settings of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrpConfig {
    pub slices: usize,
    pub partitions: usize,
    pub seed: u64,
}

impl Default for IrpConfig {
    fn default() -> Self {
        IrpConfig {
            slices: DEFAULT_SLICES,
            partitions: DEFAULT_PARTITIONS,
            seed: 0,
        }
    }
}

/// `K_u` together with its `r = 1` summand.
#[derive(Debug, Clone)]
pub struct SizeIntegration {
    pub total: IntegratedKernel,
    pub marginal: IntegratedKernel,
}

/// Integrated random-partition estimator bound to one dataset.
///
/// Construction caches everything that does not depend on the partition:
/// the sample covariance, the response distance matrix and the slices.
pub struct IrpSdr<'a> {
    data: &'a Dataset,
    sigma: CovarianceEstimate,
    root: Arc<DMatrix<f64>>,
    response: ResponseDistances,
    labels: SliceLabels,
    config: IrpConfig,
}

impl<'a> IrpSdr<'a> {
    pub fn new(data: &'a Dataset, config: IrpConfig) -> Result<Self> {
        if config.partitions == 0 {
            return Err(SdrError::Parameter("need at least one partition".into()));
        }
        let labels = slice_assign(data.y().as_slice(), config.slices)?;
        let sigma = sample_covariance(data);
        let root = Arc::new(sigma.root().clone());
        Ok(IrpSdr {
            data,
            response: ResponseDistances::new(data.y().as_slice()),
            sigma,
            root,
            labels,
            config,
        })
    }

    pub fn config(&self) -> &IrpConfig {
        &self.config
    }

    pub fn covariance(&self) -> &CovarianceEstimate {
        &self.sigma
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    fn check_u(&self, u: usize) -> Result<()> {
        let (n, p) = (self.data.n(), self.data.p());
        if u == 0 || u > p || u >= n {
            return Err(SdrError::Parameter(format!(
                "envelope size u={u} must satisfy 1 <= u <= p={p} and u < n={n}"
            )));
        }
        Ok(())
    }

    fn partitions_for(&self, r: usize) -> usize {
        if r == 1 {
            1
        } else {
            self.config.partitions
        }
    }

    /// The `l`-th sketch of cell (u, r).
    pub fn sketch(&self, u: usize, r: usize, l: usize) -> Result<SketchKernel> {
        let mut scratch = self.response.scratch();
        self.sketch_with(u, r, l, &mut scratch)
    }

    fn sketch_with(&self, u: usize, r: usize, l: usize, scratch: &mut [f64]) -> Result<SketchKernel> {
        let mut stream = Substream::derive(self.config.seed, &[u as u64, r as u64, l as u64]);
        let part = random_partition(self.data.p(), r, &mut stream)?;
        let sel = screen_with(&self.response, self.data, &part, u, scratch)?;
        let z = self.data.columns(&sel.indices);
        let sir = sir_directions_with_labels(&z, &self.labels)?;
        sketch_kernel(&sir, &sel, &self.sigma)
    }

    /// Runs all sketches of the given cells; results come back in task order.
    fn run_cells(&self, u: usize, rs: &[usize]) -> Vec<(usize, Result<SketchKernel>)> {
        let tasks: Vec<(usize, usize)> = rs
            .iter()
            .flat_map(|&r| (0..self.partitions_for(r)).map(move |l| (r, l)))
            .collect();
        tasks
            .into_par_iter()
            .map_init(
                || self.response.scratch(),
                |scratch, (r, l)| (r, self.sketch_with(u, r, l, scratch)),
            )
            .collect()
    }

    /// Averages sketches per cell and sums the cells.
    fn assemble(&self, u: usize, rs: &[usize], sketches: Vec<(usize, Result<SketchKernel>)>) -> Result<IntegratedKernel> {
        let mut cells: Vec<CellRecord> = rs
            .iter()
            .map(|&r| CellRecord {
                u,
                r,
                requested: self.partitions_for(r),
                used: 0,
                failed: 0,
            })
            .collect();
        let mut warnings = Vec::new();
        let mut kept: Vec<(usize, SketchKernel)> = Vec::new();
        for (r, res) in sketches {
            let cell = cells.iter_mut().find(|c| c.r == r).expect("known cell");
            match res {
                Ok(s) => {
                    cell.used += 1;
                    kept.push((r, s));
                }
                Err(e) => {
                    cell.failed += 1;
                    warnings.push(format!("sketch (u={u}, r={r}) dropped: {e}"));
                }
            }
        }
        if let Some(c) = cells.iter().find(|c| c.used == 0) {
            return Err(SdrError::Estimation(format!(
                "all {} sketches failed for u={}, r={}",
                c.requested, c.u, c.r
            )));
        }

        // G = Σ w·ββᵀ, accumulated on each sketch's screened coordinates
        let p = self.data.p();
        let mut left = DMatrix::zeros(p, p);
        for (r, s) in &kept {
            let used = cells.iter().find(|c| c.r == *r).expect("known cell").used as f64;
            let idx = &s.selection.indices;
            let local = &s.gammas;
            let weights = s.lambdas.map(|l| if l > 0.0 { l / used } else { 0.0 });
            let block = local * DMatrix::from_diagonal(&weights) * local.transpose();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    left[(i, j)] += block[(a, b)];
                }
            }
        }
        crate::linalg::symmetrize_upper(&mut left);
        let k_matrix = &left * self.sigma.sigma_hat();

        Ok(IntegratedKernel {
            k_matrix,
            provenance: Provenance {
                master_seed: self.config.seed,
                slices: self.config.slices,
                cells,
            },
            trace_m: Vec::new(),
            warnings,
            factor: Some(KernelFactor {
                left,
                root: Arc::clone(&self.root),
            }),
        })
    }

    /// `K_{u,r}`: mean of the sketch kernels over random size-`r` partitions.
    /// With `r = 1` the partition is unique and a single sketch is used.
    pub fn integrate_partitions(&self, u: usize, r: usize) -> Result<IntegratedKernel> {
        self.check_u(u)?;
        if r == 0 || r > u {
            return Err(SdrError::Parameter(format!(
                "block size r={r} must satisfy 1 <= r <= u={u}"
            )));
        }
        let sketches = self.run_cells(u, &[r]);
        self.assemble(u, &[r], sketches)
    }

    /// `K_u`: sum of `K_{u,r}` over every candidate block size of `u`.
    pub fn integrate_sizes(&self, u: usize) -> Result<IntegratedKernel> {
        self.check_u(u)?;
        let rs = candidate_sizes(u);
        let sketches = self.run_cells(u, &rs);
        self.assemble(u, &rs, sketches)
    }

    /// `K_u` and its `r = 1` summand from the same sketches.
    pub fn integrate_sizes_with_marginal(&self, u: usize) -> Result<SizeIntegration> {
        self.check_u(u)?;
        let rs = candidate_sizes(u);
        let mut sketches = self.run_cells(u, &rs);
        // r = 1 is the smallest candidate and has exactly one task
        let first = match &sketches[0] {
            (1, Ok(s)) => Ok(s.clone()),
            (1, Err(e)) => Err(SdrError::Estimation(e.to_string())),
            _ => unreachable!("candidate sizes start at 1"),
        };
        let marginal = self.assemble(u, &[1], vec![(1, first)])?;
        let total = self.assemble(u, &rs, std::mem::take(&mut sketches))?;
        Ok(SizeIntegration { total, marginal })
    }

    /// `Σ_u K_u / m_u` with `m_u = trace(K_u)`.
    pub fn ensemble_kernel(&self, u_set: &[usize]) -> Result<IntegratedKernel> {
        if u_set.is_empty() {
            return Err(SdrError::Parameter("empty envelope-size set".into()));
        }
        let mut kernels = Vec::with_capacity(u_set.len());
        for &u in u_set {
            kernels.push((u, self.integrate_sizes(u)?));
        }
        combine_ensemble(&kernels)
    }
}

/// Normalizes each `K_u` by its trace and sums them.
pub fn combine_ensemble(kernels: &[(usize, IntegratedKernel)]) -> Result<IntegratedKernel> {
    let first = kernels
        .first()
        .ok_or_else(|| SdrError::Parameter("empty envelope-size set".into()))?;
    let mut out = first.1.zeros_like();
    let mut any = false;
    for (u, k) in kernels {
        let m_u = k.trace();
        let skipped = !(m_u > DEGENERATE_TRACE);
        out.trace_m.push(Normalizer { u: *u, m_u, skipped });
        if skipped {
            out.warnings.push(format!("envelope size u={u} skipped: trace {m_u:e}"));
            out.provenance.cells.extend(k.provenance.cells.iter().cloned());
            continue;
        }
        out.add_scaled(k, 1.0 / m_u);
        any = true;
    }
    if !any {
        return Err(SdrError::Estimation(
            "every envelope size produced a degenerate kernel".into(),
        ));
    }
    Ok(out)
}

/// `K_{u,r}` with default slicing.
pub fn integrate_partitions(d: &Dataset, u: usize, r: usize, partitions: usize, seed: u64) -> Result<IntegratedKernel> {
    IrpSdr::new(d, IrpConfig { partitions, seed, ..IrpConfig::default() })?.integrate_partitions(u, r)
}

/// `K_u` with default slicing.
pub fn integrate_sizes(d: &Dataset, u: usize, partitions: usize, seed: u64) -> Result<IntegratedKernel> {
    IrpSdr::new(d, IrpConfig { partitions, seed, ..IrpConfig::default() })?.integrate_sizes(u)
}

/// Ensemble kernel with default slicing.
pub fn ensemble_kernel(d: &Dataset, u_set: &[usize], partitions: usize, seed: u64) -> Result<IntegratedKernel> {
    IrpSdr::new(d, IrpConfig { partitions, seed, ..IrpConfig::default() })?.ensemble_kernel(u_set)
}

/// Final estimate: an orthonormal p × d basis plus the kernel spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdrFit {
    #[serde(with = "row_major")]
    pub basis: DMatrix<f64>,
    pub spectrum: Vec<f64>,
    pub d_hat: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion_values: Option<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub config_echo: serde_json::Value,
}

impl SdrFit {
    /// `B̂ᵀx` for one (already centered) observation.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }
}

/// Leading `d` eigenvectors of the kernel, orthonormalized.
///
/// With a known factor `K = GΣ̂` and `Σ̂ = RᵀR`, the nonzero eigenpairs of `K`
/// are `(λ, G Rᵀ ξ)` for the eigenpairs `(λ, ξ)` of the symmetric `R G Rᵀ`.
/// Without a factor the symmetrized `(K + Kᵀ)/2` is used.
pub fn leading_basis(k: &IntegratedKernel, d: usize) -> Result<SdrFit> {
    let p = k.p();
    if d == 0 || d > p {
        return Err(SdrError::Parameter(format!(
            "basis dimension d={d} must satisfy 1 <= d <= p={p}"
        )));
    }
    let mut warnings = Vec::new();
    let (spectrum, mut candidates, rank) = match &k.factor {
        Some(f) => {
            let r = f.root.as_ref();
            let grt = &f.left * r.transpose();
            let small = r * &grt;
            let (vals, xis) = sym_eigen_desc(&small);
            let top = vals.iter().fold(0.0f64, |a, v| a.max(*v));
            let rank = vals.iter().filter(|&&v| v > RANK_TOL * top && top > 0.0).count();
            let vectors: Vec<DVector<f64>> = (0..rank.min(d))
                .map(|i| &grt * xis.column(i))
                .collect();
            let mut spectrum: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
            spectrum.resize(p, 0.0);
            (spectrum, vectors, rank)
        }
        None => {
            let (vals, vecs) = sym_eigen_desc(&k.k_matrix);
            let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let rank = vals.iter().filter(|&&v| v.abs() > RANK_TOL * top && top > 0.0).count();
            let vectors = (0..d).map(|i| vecs.column(i).into_owned()).collect();
            (vals.iter().copied().collect(), vectors, rank)
        }
    };

    if rank < d {
        warnings.push(format!(
            "requested d={d} exceeds numerical kernel rank {rank}; basis padded"
        ));
        if k.factor.is_some() {
            let (_, vecs) = sym_eigen_desc(&k.k_matrix);
            candidates.extend((0..p).map(|i| vecs.column(i).into_owned()));
        }
    }
    let basis = fill_orthonormal(&candidates, d, p);
    Ok(SdrFit {
        basis,
        spectrum,
        d_hat: d,
        criterion_values: None,
        warnings,
        config_echo: serde_json::Value::Null,
    })
}

/// Gram–Schmidt over `candidates` (then coordinate vectors) until `d`
/// orthonormal columns are collected.
fn fill_orthonormal(candidates: &[DVector<f64>], d: usize, p: usize) -> DMatrix<f64> {
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(d);
    let coords = (0..p).map(|i| {
        let mut e = DVector::zeros(p);
        e[i] = 1.0;
        e
    });
    for v in candidates.iter().cloned().chain(coords) {
        if accepted.len() == d {
            break;
        }
        let norm0 = v.norm();
        if !(norm0 > 0.0) || !norm0.is_finite() {
            continue;
        }
        let mut w = v / norm0;
        for _ in 0..2 {
            for q in &accepted {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 1e-8 {
            accepted.push(w / norm);
        }
    }
    let mut basis = DMatrix::zeros(p, d);
    for (j, q) in accepted.iter().enumerate() {
        basis.set_column(j, q);
    }
    basis
}
