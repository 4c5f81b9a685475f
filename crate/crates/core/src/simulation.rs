//! Benchmark regression models with known central subspaces, and a
//! replicate driver scoring each method against the truth.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::pca_sdr;
use crate::data::{format_float, Dataset};
use crate::error::{Result, SdrError};
use crate::kernel::{combine_ensemble, leading_basis, IntegratedKernel, IrpConfig, IrpSdr, SdrFit};
use crate::metrics::trace_correlation;
use crate::rng::{derive_tag, Substream};
use crate::select::{default_penalty, select_dimension, Direction};

/// Coefficients shared by M1 and M3.
pub const TEN_ACTIVE: [f64; 10] = [-0.5, 1.0, 0.5, 1.0, -1.0, -0.8, 0.8, 1.0, 0.5, 0.75];

/// Default noise scale of M1.
pub const DEFAULT_SIGMA0: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    M1,
    M2,
    M3,
    M4,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::M1, ModelKind::M2, ModelKind::M3, ModelKind::M4];

    pub fn default_size(self) -> (usize, usize) {
        match self {
            ModelKind::M1 => (100, 300),
            ModelKind::M2 => (200, 1000),
            ModelKind::M3 | ModelKind::M4 => (100, 500),
        }
    }

    pub fn d_true(self) -> usize {
        match self {
            ModelKind::M4 => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::M1 => "M1",
            ModelKind::M2 => "M2",
            ModelKind::M3 => "M3",
            ModelKind::M4 => "M4",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" => Ok(ModelKind::M1),
            "M2" => Ok(ModelKind::M2),
            "M3" => Ok(ModelKind::M3),
            "M4" => Ok(ModelKind::M4),
            other => Err(SdrError::Parameter(format!("unknown model {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A model instance with its true basis and population covariance.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub p: usize,
    /// Noise scale; only used by M1.
    pub sigma0: f64,
    pub true_basis: DMatrix<f64>,
    pub population_sigma: DMatrix<f64>,
    pub d_true: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let (n, p) = kind.default_size();
        Self::with_size(kind, n, p)
    }

    /// M2 places its four active coefficients at 0-based indices
    /// `p/2 .. p/2+4` (500..504 for the default p = 1000).
    pub fn with_size(kind: ModelKind, n: usize, p: usize) -> Result<Self> {
        let min_p = match kind {
            ModelKind::M2 => 8,
            ModelKind::M4 => 4,
            _ => 10,
        };
        if p < min_p || n < 2 {
            return Err(SdrError::Parameter(format!(
                "{kind} needs p >= {min_p} and n >= 2 (got n={n}, p={p})"
            )));
        }
        let (true_basis, population_sigma) = match kind {
            ModelKind::M1 => (ten_active(p), DMatrix::identity(p, p) / 12.0),
            ModelKind::M2 => {
                let mut b = DMatrix::zeros(p, 1);
                for k in 0..4 {
                    b[(m2_offset(p) + k, 0)] = 1.0;
                }
                (b, DMatrix::from_fn(p, p, |i, j| 0.5f64.powi(i.abs_diff(j) as i32)))
            }
            ModelKind::M3 => (ten_active(p), equicorrelated(p)),
            ModelKind::M4 => {
                let (b1, b2) = m4_coefficients(p);
                let mut coef = DMatrix::zeros(p, 2);
                coef.set_column(0, &b1);
                coef.set_column(1, &b2);
                let basis = equicorrelated_inverse(p) * &coef;
                // cov(Y, Y²) for Y ~ U(0,1)
                let c = DMatrix::from_row_slice(2, 2, &[1.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0, 4.0 / 45.0]);
                let sigma = &coef * c * coef.transpose() + equicorrelated(p) * 0.25;
                (basis, sigma)
            }
        };
        Ok(ModelSpec {
            kind,
            n,
            p,
            sigma0: DEFAULT_SIGMA0,
            d_true: kind.d_true(),
            true_basis,
            population_sigma,
        })
    }

    pub fn with_sigma0(mut self, sigma0: f64) -> Self {
        self.sigma0 = sigma0;
        self
    }

    /// Indices with a nonzero row in the true basis.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&i| self.true_basis.row(i).iter().any(|&v| v != 0.0))
            .collect()
    }
}

fn m2_offset(p: usize) -> usize {
    p / 2
}

fn ten_active(p: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(p, 1);
    for (k, &c) in TEN_ACTIVE.iter().enumerate() {
        b[(k, 0)] = c;
    }
    b
}

fn m4_coefficients(p: usize) -> (DVector<f64>, DVector<f64>) {
    let mut b1 = DVector::zeros(p);
    let mut b2 = DVector::zeros(p);
    b1[0] = 0.5;
    b1[1] = 0.75;
    b2[2] = 0.75;
    b2[3] = 0.5;
    (b1, b2)
}

/// `0.5·I + 0.5·11ᵀ`
pub fn equicorrelated(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 })
}

/// Closed-form inverse `2(I − 11ᵀ/(p+1))` of [`equicorrelated`].
pub fn equicorrelated_inverse(p: usize) -> DMatrix<f64> {
    let off = -2.0 / (p as f64 + 1.0);
    DMatrix::from_fn(p, p, |i, j| if i == j { 2.0 + off } else { off })
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Raw draw `(y, X)` with uncentered covariates.
pub fn generate_raw(spec: &ModelSpec, rng: &mut impl Rng) -> (DVector<f64>, DMatrix<f64>) {
    let (n, p) = (spec.n, spec.p);
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let half = 0.5f64.sqrt();
    for i in 0..n {
        match spec.kind {
            ModelKind::M1 => {
                for j in 0..p {
                    x[(i, j)] = rng.gen::<f64>();
                }
                let idx: f64 = TEN_ACTIVE.iter().enumerate().map(|(k, c)| c * x[(i, k)]).sum();
                y[i] = (idx - 4.0).abs().ln() + spec.sigma0 * normal(rng);
            }
            ModelKind::M2 => {
                let innov = (1.0f64 - 0.25).sqrt();
                let mut prev = normal(rng);
                x[(i, 0)] = prev;
                for j in 1..p {
                    prev = 0.5 * prev + innov * normal(rng);
                    x[(i, j)] = prev;
                }
                let off = m2_offset(p);
                let idx: f64 = (off..off + 4).map(|j| x[(i, j)]).sum();
                y[i] = 1.0 + idx.exp() + normal(rng);
            }
            ModelKind::M3 => {
                let common = normal(rng);
                for j in 0..p {
                    x[(i, j)] = half * normal(rng) + half * common;
                }
                let idx: f64 = TEN_ACTIVE.iter().enumerate().map(|(k, c)| c * x[(i, k)]).sum();
                y[i] = 0.5 * (0.75 * idx).exp() * normal(rng);
            }
            ModelKind::M4 => {
                let yi: f64 = rng.gen();
                let common = normal(rng);
                for j in 0..p {
                    x[(i, j)] = 0.5 * (half * normal(rng) + half * common);
                }
                x[(i, 0)] += 0.5 * yi;
                x[(i, 1)] += 0.75 * yi;
                x[(i, 2)] += 0.75 * yi * yi;
                x[(i, 3)] += 0.5 * yi * yi;
                y[i] = yi;
            }
        }
    }
    if spec.kind == ModelKind::M1 {
        x.add_scalar_mut(-0.5);
    }
    (y, x)
}

/// Draws a dataset from the model; returns it with the true basis.
pub fn generate(spec: &ModelSpec, seed: u64) -> Result<(Dataset, DMatrix<f64>)> {
    let mut stream = Substream::derive(seed, &[]);
    let (y, x) = generate_raw(spec, stream.rng());
    Ok((Dataset::new(y, x, false)?, spec.true_basis.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IrpSdrBu,
    IrpSdrEnsemble,
    MarginalR1,
    PcaSdr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::IrpSdrBu, Method::IrpSdrEnsemble, Method::MarginalR1, Method::PcaSdr];

    pub fn name(self) -> &'static str {
        match self {
            Method::IrpSdrBu => "irp_sdr_bu",
            Method::IrpSdrEnsemble => "irp_sdr_ensemble",
            Method::MarginalR1 => "marginal_r1",
            Method::PcaSdr => "pca_sdr",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| SdrError::Parameter(format!("unknown method {s:?}")))
    }
}

/// Envelope sizes, either absolute or as fractions of each model's n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UGrid {
    Absolute(Vec<usize>),
    Fractions(Vec<f64>),
}

impl UGrid {
    /// `{0.1n, 0.2n, ..., 0.5n}`
    pub fn default_fractions() -> Self {
        UGrid::Fractions(vec![0.1, 0.2, 0.3, 0.4, 0.5])
    }

    pub fn resolve(&self, n: usize) -> Vec<usize> {
        match self {
            UGrid::Absolute(us) => us.clone(),
            UGrid::Fractions(fs) => fs.iter().map(|f| (f * n as f64 + 1e-9).floor() as usize).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub models: Vec<ModelSpec>,
    pub methods: Vec<Method>,
    pub u_grid: UGrid,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    pub slices: usize,
    pub partitions: usize,
    /// BIC penalty; `None` means √n.
    pub c_n: Option<f64>,
}

/// One (model, method, u, replicate) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelKind,
    pub method: Method,
    /// `None` for the ensemble, which uses the whole grid.
    pub u: Option<usize>,
    pub replicate: usize,
    pub rho: Option<f64>,
    pub d_hat: Option<usize>,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: ModelKind,
    pub method: Method,
    pub u: Option<usize>,
    pub replicates: usize,
    pub failures: usize,
    pub mean_rho: f64,
    pub median_rho: f64,
    pub mean_d_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate(&self, model: ModelKind, method: Method, u: Option<usize>) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.model == model && a.method == method && a.u == u)
    }

    /// Tidy CSV, one row per cell.
    pub fn write_csv(&self, path: &Path, include_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| SdrError::Io(std::io::Error::other(e.to_string())))?;
        let mut header = vec!["model", "method", "u", "replicate", "rho", "d_hat"];
        if include_timing {
            header.push("wall_time");
        }
        header.push("error");
        let io = |e: csv::Error| SdrError::Io(std::io::Error::other(e.to_string()));
        w.write_record(&header).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![
                r.model.to_string(),
                r.method.name().to_string(),
                r.u.map_or("all".to_string(), |u| u.to_string()),
                r.replicate.to_string(),
                r.rho.map_or(String::new(), format_float),
                r.d_hat.map_or(String::new(), |d| d.to_string()),
            ];
            if include_timing {
                rec.push(format!("{:.6}", r.wall_time));
            }
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregates as pretty JSON (no timing information).
    pub fn aggregates_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.aggregates)?)
    }
}

fn score(fit: &SdrFit, spec: &ModelSpec) -> Result<f64> {
    trace_correlation(&fit.basis, &spec.true_basis, &spec.population_sigma)
}

fn bic_dim(fit: &SdrFit, n: usize, c_n: f64) -> Option<usize> {
    select_dimension(&fit.spectrum, n, c_n, Direction::OptimizeMax).ok().map(|c| c.d_hat)
}

struct CellOutcome {
    method: Method,
    u: Option<usize>,
    result: Result<(f64, Option<usize>)>,
    wall_time: f64,
}

fn run_replicate(plan: &ExperimentPlan, model_idx: usize, rep: usize) -> Vec<CellOutcome> {
    let spec = &plan.models[model_idx];
    let data_seed = derive_tag(plan.seed, &[model_idx as u64, rep as u64, 0]);
    let fit_seed = derive_tag(plan.seed, &[model_idx as u64, rep as u64, 1]);
    let grid = plan.u_grid.resolve(spec.n);
    let c_n = plan.c_n.unwrap_or_else(|| default_penalty(spec.n));
    let wants = |m: Method| plan.methods.contains(&m);
    let mut out = Vec::new();

    let fail_all = |e: &SdrError, out: &mut Vec<CellOutcome>| {
        for &m in &plan.methods {
            let us: Vec<Option<usize>> = if m == Method::IrpSdrEnsemble {
                vec![None]
            } else {
                grid.iter().map(|&u| Some(u)).collect()
            };
            for u in us {
                out.push(CellOutcome {
                    method: m,
                    u,
                    result: Err(SdrError::Estimation(e.to_string())),
                    wall_time: 0.0,
                });
            }
        }
    };

    let data = match generate(spec, data_seed) {
        Ok((d, _)) => d,
        Err(e) => {
            fail_all(&e, &mut out);
            return out;
        }
    };
    let est = match IrpSdr::new(
        &data,
        IrpConfig {
            slices: plan.slices,
            partitions: plan.partitions,
            seed: fit_seed,
        },
    ) {
        Ok(est) => est,
        Err(e) => {
            fail_all(&e, &mut out);
            return out;
        }
    };

    let evaluate = |fit: Result<SdrFit>| -> Result<(f64, Option<usize>)> {
        let fit = fit?;
        Ok((score(&fit, spec)?, bic_dim(&fit, spec.n, c_n)))
    };

    let need_kernels = wants(Method::IrpSdrBu) || wants(Method::IrpSdrEnsemble) || wants(Method::MarginalR1);
    let mut kernels: Vec<(usize, IntegratedKernel)> = Vec::new();
    let mut kernel_errors: Vec<(usize, String)> = Vec::new();
    for &u in &grid {
        if need_kernels {
            let t0 = Instant::now();
            let integ = if wants(Method::IrpSdrBu) || wants(Method::IrpSdrEnsemble) {
                est.integrate_sizes_with_marginal(u).map(|s| (Some(s.total), s.marginal))
            } else {
                est.integrate_partitions(u, 1).map(|m| (None, m))
            };
            let integ_time = t0.elapsed().as_secs_f64();
            match integ {
                Ok((total, marginal)) => {
                    if let Some(total) = total {
                        if wants(Method::IrpSdrBu) {
                            let t1 = Instant::now();
                            let result = evaluate(leading_basis(&total, spec.d_true));
                            out.push(CellOutcome {
                                method: Method::IrpSdrBu,
                                u: Some(u),
                                result,
                                wall_time: integ_time + t1.elapsed().as_secs_f64(),
                            });
                        }
                        kernels.push((u, total));
                    }
                    if wants(Method::MarginalR1) {
                        let t1 = Instant::now();
                        let result = evaluate(leading_basis(&marginal, spec.d_true));
                        out.push(CellOutcome {
                            method: Method::MarginalR1,
                            u: Some(u),
                            result,
                            wall_time: t1.elapsed().as_secs_f64(),
                        });
                    }
                }
                Err(e) => {
                    kernel_errors.push((u, e.to_string()));
                    for m in [Method::IrpSdrBu, Method::MarginalR1] {
                        if wants(m) {
                            out.push(CellOutcome {
                                method: m,
                                u: Some(u),
                                result: Err(SdrError::Estimation(e.to_string())),
                                wall_time: integ_time,
                            });
                        }
                    }
                }
            }
        }
        if wants(Method::PcaSdr) {
            let t0 = Instant::now();
            let result = evaluate(pca_sdr(&data, u, plan.slices, spec.d_true));
            out.push(CellOutcome {
                method: Method::PcaSdr,
                u: Some(u),
                result,
                wall_time: t0.elapsed().as_secs_f64(),
            });
        }
    }
    if wants(Method::IrpSdrEnsemble) {
        let t0 = Instant::now();
        let result = if kernel_errors.is_empty() {
            evaluate(combine_ensemble(&kernels).and_then(|k| leading_basis(&k, spec.d_true)))
        } else {
            Err(SdrError::Estimation(format!("envelope sizes failed: {kernel_errors:?}")))
        };
        out.push(CellOutcome {
            method: Method::IrpSdrEnsemble,
            u: None,
            result,
            wall_time: t0.elapsed().as_secs_f64(),
        });
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 0 {
        0.5 * (values[m - 1] + values[m])
    } else {
        values[m]
    }
}

fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(ModelKind, Method, Option<usize>), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.model, r.method, r.u)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, method, u), rs)| {
            let mut rhos: Vec<f64> = rs.iter().filter_map(|r| r.rho).collect();
            let dims: Vec<f64> = rs.iter().filter_map(|r| r.d_hat.map(|d| d as f64)).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            Aggregate {
                model,
                method,
                u,
                replicates: rs.len(),
                failures: rs.iter().filter(|r| r.rho.is_none()).count(),
                mean_rho: mean(&rhos),
                median_rho: median(&mut rhos),
                mean_d_hat: mean(&dims),
            }
        })
        .collect()
}

/// Runs every (model, replicate) pair, fitting each requested method at each
/// envelope size. Results are independent of `workers`.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    if plan.replicates == 0 {
        return Err(SdrError::Parameter("need at least one replicate".into()));
    }
    if plan.methods.is_empty() || plan.models.is_empty() {
        return Err(SdrError::Parameter("need at least one model and one method".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| SdrError::Parameter(format!("thread pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..plan.models.len())
        .flat_map(|m| (0..plan.replicates).map(move |r| (m, r)))
        .collect();
    let outcomes: Vec<((usize, usize), Vec<CellOutcome>)> = pool.install(|| {
        jobs.into_par_iter()
            .map(|(m, r)| ((m, r), run_replicate(plan, m, r)))
            .collect()
    });

    let mut rows = Vec::new();
    for ((m, rep), cells) in outcomes {
        for c in cells {
            let (rho, d_hat, error) = match c.result {
                Ok((rho, d)) => (Some(rho), d, None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            rows.push(ReportRow {
                model: plan.models[m].kind,
                method: c.method,
                u: c.u,
                replicate: rep,
                rho,
                d_hat,
                wall_time: c.wall_time,
                error,
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.model, a.method, a.u.map_or(usize::MAX, |u| u), a.replicate).cmp(&(
            b.model,
            b.method,
            b.u.map_or(usize::MAX, |u| u),
            b.replicate,
        ))
    });
    let aggregates = aggregate(&rows);
    Ok(ExperimentReport { rows, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m1_coefficients() {
        let spec = ModelSpec::new(ModelKind::M1).unwrap();
        assert_eq!((spec.n, spec.p, spec.d_true), (100, 300, 1));
        let b: Vec<f64> = spec.true_basis.column(0).iter().copied().collect();
        assert_eq!(&b[..10], &TEN_ACTIVE);
        assert!(b[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn m2_active_block() {
        let spec = ModelSpec::new(ModelKind::M2).unwrap();
        assert_eq!(spec.active_set(), vec![500, 501, 502, 503]);
        assert!(spec.active_set().iter().all(|&i| spec.true_basis[(i, 0)] == 1.0));
    }

    #[test]
    fn m4_closed_form_inverse() {
        let p = 500;
        let prod = equicorrelated(p) * equicorrelated_inverse(p);
        assert!((prod - DMatrix::<f64>::identity(p, p)).abs().max() < 1e-10);
        let spec = ModelSpec::new(ModelKind::M4).unwrap();
        assert_eq!(spec.true_basis.ncols(), 2);
    }

    #[test]
    fn u_grid_fractions() {
        assert_eq!(UGrid::default_fractions().resolve(100), vec![10, 20, 30, 40, 50]);
        assert_eq!(UGrid::default_fractions().resolve(200), vec![20, 40, 60, 80, 100]);
    }

    #[test]
    fn generation_is_seeded() {
        let spec = ModelSpec::with_size(ModelKind::M3, 20, 30).unwrap();
        let (a, _) = generate(&spec, 5).unwrap();
        let (b, _) = generate(&spec, 5).unwrap();
        let (c, _) = generate(&spec, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
