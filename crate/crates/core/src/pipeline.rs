//! Command implementations behind the `irpsdr` binary.
//!
//! Every command reads a [`RunConfig`], built from defaults, then an optional
//! `key = value` config file, then command-line flags. Outputs embed the
//! resolved configuration (`config_echo`) with every default filled in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::baselines::pca_sdr;
use crate::data::{read_numeric_csv, write_dataset_csv, write_matrix_csv, Dataset, ResponseColumn};
use crate::eeg::{eeg_matrix, read_eeg_long_csv, EegLayout};
use crate::error::{Result, SdrError};
use crate::kernel::{leading_basis, IntegratedKernel, IrpConfig, IrpSdr, Normalizer, Provenance, SdrFit};
use crate::lda::{binary_classes, Lda1d};
use crate::metrics::SubspaceScore;
use crate::rng::derive_tag;
use crate::select::{default_penalty, select_dimension, Direction};
use crate::simulation::{generate_raw, run_experiment, ExperimentPlan, ExperimentReport, Method, ModelKind, ModelSpec, UGrid};

/// An envelope size, absolute or as a fraction of n (written `0.3n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum USpec {
    Absolute(usize),
    Fraction(f64),
}

impl USpec {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            USpec::Absolute(u) => u,
            USpec::Fraction(f) => ((f * n as f64 + 1e-9).floor() as usize).max(1),
        }
    }
}

impl std::str::FromStr for USpec {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || SdrError::Parameter(format!("cannot parse envelope size {s:?}"));
        if let Some(f) = s.strip_suffix('n') {
            let f: f64 = f.parse().map_err(|_| bad())?;
            if !(f > 0.0 && f.is_finite()) {
                return Err(bad());
            }
            Ok(USpec::Fraction(f))
        } else {
            let u: usize = s.parse().map_err(|_| bad())?;
            if u == 0 {
                return Err(bad());
            }
            Ok(USpec::Absolute(u))
        }
    }
}

impl std::fmt::Display for USpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            USpec::Absolute(u) => write!(f, "{u}"),
            USpec::Fraction(x) => write!(f, "{x}n"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimSpec {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for DimSpec {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(DimSpec::Auto),
            other => match other.parse::<usize>() {
                Ok(d) if d > 0 => Ok(DimSpec::Fixed(d)),
                _ => Err(SdrError::Parameter(format!("dimension must be 'auto' or a positive integer, got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdrMethod {
    Irp,
    Pca,
}

impl std::str::FromStr for SdrMethod {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "irp" | "irp-sdr" | "irp_sdr" => Ok(SdrMethod::Irp),
            "pca" | "pca-sdr" | "pca_sdr" => Ok(SdrMethod::Pca),
            other => Err(SdrError::Parameter(format!("unknown method {other:?}"))),
        }
    }
}

impl SdrMethod {
    fn name(self) -> &'static str {
        match self {
            SdrMethod::Irp => "irp",
            SdrMethod::Pca => "pca",
        }
    }
}

/// All command parameters. Unused fields are ignored by a given command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub response: ResponseColumn,
    pub standardize: bool,
    /// Empty means the grid `{0.1n, ..., 0.5n}`.
    pub u: Vec<USpec>,
    pub partitions: usize,
    pub slices: usize,
    pub d: DimSpec,
    pub c_n: Option<f64>,
    pub direction: Direction,
    pub seed: u64,
    pub workers: usize,
    pub method: SdrMethod,
    pub fixed_basis: bool,
    pub models: Vec<ModelKind>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub sigma0: f64,
    pub timing: bool,
    pub summary: Option<PathBuf>,
    pub data_out: Option<PathBuf>,
    pub basis_out: Option<PathBuf>,
    pub sigma_out: Option<PathBuf>,
    pub basis: Option<PathBuf>,
    pub true_basis: Option<PathBuf>,
    pub sigma: Option<PathBuf>,
    pub time_points: usize,
    pub channels: usize,
    pub block: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let layout = EegLayout::default();
        RunConfig {
            input: None,
            output: None,
            response: ResponseColumn::Index(0),
            standardize: false,
            u: Vec::new(),
            partitions: crate::kernel::DEFAULT_PARTITIONS,
            slices: crate::sir::DEFAULT_SLICES,
            d: DimSpec::Auto,
            c_n: None,
            direction: Direction::OptimizeMax,
            seed: 0,
            workers: 1,
            method: SdrMethod::Irp,
            fixed_basis: false,
            models: ModelKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            replicates: 100,
            n: None,
            p: None,
            sigma0: crate::simulation::DEFAULT_SIGMA0,
            timing: false,
            summary: None,
            data_out: None,
            basis_out: None,
            sigma_out: None,
            basis: None,
            true_basis: None,
            sigma: None,
            time_points: layout.time_points,
            channels: layout.channels,
            block: layout.block,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| SdrError::Parameter(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(SdrError::Parameter(format!("invalid boolean {value:?} for {key}"))),
    }
}

fn parse_list<T: std::str::FromStr<Err = SdrError>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

impl RunConfig {
    /// Sets one field by its flag name (`-` and `_` are interchangeable).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        let path = || Some(PathBuf::from(v));
        match key.as_str() {
            "input" => self.input = path(),
            "output" => self.output = path(),
            "response" => self.response = v.parse().unwrap_or(ResponseColumn::Index(0)),
            "standardize" => self.standardize = parse_bool(&key, v)?,
            "u" => self.u = parse_list(v)?,
            "partitions" => self.partitions = parse_num(&key, v)?,
            "slices" => self.slices = parse_num(&key, v)?,
            "d" => self.d = v.parse()?,
            "c-n" => {
                self.c_n = match v {
                    "auto" | "sqrt-n" => None,
                    _ => Some(parse_num(&key, v)?),
                }
            }
            "direction" => self.direction = v.parse()?,
            "seed" => self.seed = parse_num(&key, v)?,
            "workers" => self.workers = parse_num(&key, v)?,
            "method" => self.method = v.parse()?,
            "fixed-basis" => self.fixed_basis = parse_bool(&key, v)?,
            "models" => self.models = parse_list(v)?,
            "methods" => self.methods = parse_list(v)?,
            "replicates" => self.replicates = parse_num(&key, v)?,
            "n" => self.n = Some(parse_num(&key, v)?),
            "p" => self.p = Some(parse_num(&key, v)?),
            "sigma0" => self.sigma0 = parse_num(&key, v)?,
            "timing" => self.timing = parse_bool(&key, v)?,
            "summary" => self.summary = path(),
            "data-out" => self.data_out = path(),
            "basis-out" => self.basis_out = path(),
            "sigma-out" => self.sigma_out = path(),
            "basis" => self.basis = path(),
            "true-basis" => self.true_basis = path(),
            "sigma" => self.sigma = path(),
            "time-points" => self.time_points = parse_num(&key, v)?,
            "channels" => self.channels = parse_num(&key, v)?,
            "block" => self.block = parse_num(&key, v)?,
            other => return Err(SdrError::Parameter(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (key, value) in parse_config_file(path)? {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(SdrError::Parameter("partitions must be positive".into()));
        }
        if self.slices < 2 {
            return Err(SdrError::Parameter("slices must be at least 2".into()));
        }
        if self.workers == 0 {
            return Err(SdrError::Parameter("workers must be positive".into()));
        }
        Ok(())
    }

    /// Envelope sizes for a sample of size n, deduplicated in order.
    pub fn resolve_u(&self, n: usize) -> Vec<usize> {
        let specs: Vec<USpec> = if self.u.is_empty() {
            [0.1, 0.2, 0.3, 0.4, 0.5].into_iter().map(USpec::Fraction).collect()
        } else {
            self.u.clone()
        };
        let mut out = Vec::new();
        for s in specs {
            let u = s.resolve(n);
            if !out.contains(&u) {
                out.push(u);
            }
        }
        out
    }

    fn response_echo(&self) -> serde_json::Value {
        match &self.response {
            ResponseColumn::Index(i) => json!(i),
            ResponseColumn::Name(s) => json!(s),
        }
    }

    fn penalty(&self, n: usize) -> f64 {
        self.c_n.unwrap_or_else(|| default_penalty(n))
    }

    fn irp_config(&self, seed: u64) -> IrpConfig {
        IrpConfig {
            slices: self.slices,
            partitions: self.partitions,
            seed,
        }
    }
}

/// Reads `key = value` lines (also `key: value`), skipping blanks and `#` comments.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| SdrError::Parameter(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Seconds since the Unix epoch; the only field allowed to differ between reruns.
pub fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    secs.to_string()
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| SdrError::Parameter(format!("--{flag} is required")))
}

/// Raw table split into response and raw covariates.
fn load_raw(cfg: &RunConfig) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let path = require(&cfg.input, "input")?;
    let table = read_numeric_csv(path)?;
    let ncols = table.ncols();
    let ycol = match &cfg.response {
        ResponseColumn::Index(i) => *i,
        ResponseColumn::Name(name) => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| SdrError::Ingestion {
                row: 1,
                column: 0,
                message: format!("response column {name:?} not found in header"),
            })?,
    };
    if ycol >= ncols || ncols < 2 {
        return Err(SdrError::Ingestion {
            row: 1,
            column: ycol,
            message: format!("response column {ycol} unusable with {ncols} columns"),
        });
    }
    let n = table.rows.len();
    let cols: Vec<usize> = (0..ncols).filter(|&c| c != ycol).collect();
    let y = DVector::from_fn(n, |i, _| table.rows[i][ycol]);
    let x = DMatrix::from_fn(n, cols.len(), |i, j| table.rows[i][cols[j]]);
    Ok((y, x))
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    crate::data::load_csv(require(&cfg.input, "input")?, &cfg.response, cfg.standardize)
}

/// JSON layout written by `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub timestamp: String,
    pub fit: SdrFit,
    pub provenance: Option<Provenance>,
    pub normalizers: Vec<Normalizer>,
    pub column_means: Vec<f64>,
    pub column_sds: Option<Vec<f64>>,
}

/// Kernel for the configured envelope sizes: the ensemble over several, or
/// the size-integrated kernel for a single one.
pub fn fit_kernel(d: &Dataset, cfg: &RunConfig, seed: u64) -> Result<IntegratedKernel> {
    let us = cfg.resolve_u(d.n());
    let est = IrpSdr::new(d, cfg.irp_config(seed))?;
    if us.len() == 1 {
        est.integrate_sizes(us[0])
    } else {
        est.ensemble_kernel(&us)
    }
}

/// Basis of the configured dimension, choosing it by BIC when `d = auto`.
pub fn basis_from_kernel(k: &IntegratedKernel, n: usize, cfg: &RunConfig) -> Result<SdrFit> {
    match cfg.d {
        DimSpec::Fixed(d) => leading_basis(k, d),
        DimSpec::Auto => {
            let first = leading_basis(k, 1)?;
            let choice = select_dimension(&first.spectrum, n, cfg.penalty(n), cfg.direction)?;
            let mut fit = if choice.d_hat == 1 {
                first
            } else {
                leading_basis(k, choice.d_hat)?
            };
            fit.criterion_values = Some(choice.criterion_values);
            Ok(fit)
        }
    }
}

fn fit_echo(cfg: &RunConfig, n: usize, p: usize) -> serde_json::Value {
    json!({
        "command": "fit",
        "input": cfg.input.as_ref().map(|p| p.display().to_string()),
        "response": cfg.response_echo(),
        "standardize": cfg.standardize,
        "method": cfg.method.name(),
        "u": cfg.resolve_u(n),
        "partitions": cfg.partitions,
        "slices": cfg.slices,
        "d": match cfg.d { DimSpec::Auto => json!("auto"), DimSpec::Fixed(d) => json!(d) },
        "c_n": cfg.penalty(n),
        "direction": cfg.direction,
        "seed": cfg.seed,
        "n": n,
        "p": p,
    })
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<FitReport> {
    cfg.check()?;
    let d = load_dataset(cfg)?;
    let (mut fit, provenance, normalizers) = match cfg.method {
        SdrMethod::Irp => {
            let k = fit_kernel(&d, cfg, cfg.seed)?;
            let mut fit = basis_from_kernel(&k, d.n(), cfg)?;
            fit.warnings.extend(k.warnings.iter().cloned());
            (fit, Some(k.provenance), k.trace_m)
        }
        SdrMethod::Pca => {
            let us = cfg.resolve_u(d.n());
            if us.len() != 1 {
                return Err(SdrError::Parameter("PCA-SDR needs a single envelope size".into()));
            }
            let dim = match cfg.d {
                DimSpec::Fixed(k) => k,
                DimSpec::Auto => {
                    return Err(SdrError::Parameter("PCA-SDR needs an explicit dimension".into()));
                }
            };
            (pca_sdr(&d, us[0], cfg.slices, dim)?, None, Vec::new())
        }
    };
    fit.config_echo = fit_echo(cfg, d.n(), d.p());
    Ok(FitReport {
        timestamp: timestamp(),
        fit,
        provenance,
        normalizers,
        column_means: d.column_means().iter().copied().collect(),
        column_sds: d.column_sds().map(|s| s.iter().copied().collect()),
    })
}

/// Leave-one-out accuracy at one envelope size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UAccuracy {
    pub u: usize,
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
    /// `confusion[actual][predicted]`, classes in ascending order.
    pub confusion: [[usize; 2]; 2],
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub timestamp: String,
    pub method: SdrMethod,
    pub fixed_basis: bool,
    pub classes: [f64; 2],
    pub results: Vec<UAccuracy>,
    pub config_echo: serde_json::Value,
}

fn sdr_direction(d: &Dataset, cfg: &RunConfig, u: usize, seed: u64) -> Result<DVector<f64>> {
    let fit = match cfg.method {
        SdrMethod::Irp => {
            let est = IrpSdr::new(d, cfg.irp_config(seed))?;
            leading_basis(&est.integrate_sizes(u)?, 1)?
        }
        SdrMethod::Pca => pca_sdr(d, u, cfg.slices, 1)?,
    };
    Ok(fit.basis.column(0).into_owned())
}

fn drop_row(y: &DVector<f64>, x: &DMatrix<f64>, i: usize) -> (DVector<f64>, DMatrix<f64>) {
    (y.clone().remove_row(i), x.clone().remove_row(i))
}

/// Predicts sample `i` from a model trained on the other rows. With
/// `basis = None` the direction is refit on the training rows.
fn classify_fold(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    i: usize,
    cfg: &RunConfig,
    u: usize,
    basis: Option<&(Dataset, DVector<f64>)>,
) -> Result<f64> {
    let (yt, xt) = drop_row(y, x, i);
    let (z_train, z_test) = match basis {
        None => {
            let d = Dataset::new(yt.clone(), xt, cfg.standardize)?;
            let seed = derive_tag(cfg.seed, &[u as u64, i as u64]);
            let b = sdr_direction(&d, cfg, u, seed)?;
            let z = d.x() * &b;
            let held = d.transform_row(x.row(i).iter().copied().collect::<Vec<_>>().as_slice())?;
            (z, held.dot(&b))
        }
        Some((full, b)) => {
            let z_all = full.x() * b;
            (z_all.clone().remove_row(i), z_all[i])
        }
    };
    let lda = Lda1d::fit(z_train.as_slice(), yt.as_slice())?;
    Ok(lda.predict(z_test))
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<ClassificationReport> {
    cfg.check()?;
    let (y, x) = load_raw(cfg)?;
    classify_raw(&y, &x, cfg)
}

/// Leave-one-out classification of raw `(y, X)` at every configured `u`.
pub fn classify_raw(y: &DVector<f64>, x: &DMatrix<f64>, cfg: &RunConfig) -> Result<ClassificationReport> {
    let classes = binary_classes(y.as_slice())?;
    let n = y.len();
    if n < 4 {
        return Err(SdrError::Parameter("leave-one-out classification needs at least 4 samples".into()));
    }
    let full = Dataset::new(y.clone(), x.clone(), cfg.standardize)?;
    // folds train on n − 1 rows, so sizes resolve against that
    let us = cfg.resolve_u(n - 1);
    let mut results = Vec::with_capacity(us.len());
    for &u in &us {
        let fixed = if cfg.fixed_basis {
            Some((full.clone(), sdr_direction(&full, cfg, u, derive_tag(cfg.seed, &[u as u64]))?))
        } else {
            None
        };
        let preds: Vec<Result<f64>> = (0..n)
            .into_par_iter()
            .map(|i| classify_fold(y, x, i, cfg, u, fixed.as_ref()))
            .collect();
        let mut confusion = [[0usize; 2]; 2];
        let mut failed = 0;
        let mut correct = 0;
        for (i, pred) in preds.into_iter().enumerate() {
            let actual = usize::from(y[i] == classes[1]);
            match pred {
                Ok(p) => {
                    let predicted = usize::from(p == classes[1]);
                    confusion[actual][predicted] += 1;
                    correct += usize::from(actual == predicted);
                }
                Err(SdrError::Parameter(m)) => return Err(SdrError::Parameter(m)),
                Err(_) => {
                    // an unusable fold counts as a misclassification
                    failed += 1;
                    confusion[actual][1 - actual] += 1;
                }
            }
        }
        results.push(UAccuracy {
            u,
            accuracy: correct as f64 / n as f64,
            correct,
            n,
            confusion,
            failed_folds: failed,
        });
    }
    let echo = json!({
        "command": "classify",
        "input": cfg.input.as_ref().map(|p| p.display().to_string()),
        "response": cfg.response_echo(),
        "standardize": cfg.standardize,
        "method": cfg.method.name(),
        "fixed_basis": cfg.fixed_basis,
        "u": us,
        "partitions": cfg.partitions,
        "slices": cfg.slices,
        "d": 1,
        "seed": cfg.seed,
        "n": n,
        "p": x.ncols(),
    });
    Ok(ClassificationReport {
        timestamp: timestamp(),
        method: cfg.method,
        fixed_basis: cfg.fixed_basis,
        classes,
        results,
        config_echo: echo,
    })
}

fn model_specs(cfg: &RunConfig) -> Result<Vec<ModelSpec>> {
    cfg.models
        .iter()
        .map(|&k| {
            let (n0, p0) = k.default_size();
            Ok(ModelSpec::with_size(k, cfg.n.unwrap_or(n0), cfg.p.unwrap_or(p0))?.with_sigma0(cfg.sigma0))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub report: Option<ExperimentReport>,
    pub config_echo: serde_json::Value,
}

/// Optionally writes one generated dataset (first model, `seed`), then runs
/// the replicate experiment when `replicates > 0`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    cfg.check()?;
    let specs = model_specs(cfg)?;
    if cfg.data_out.is_some() || cfg.basis_out.is_some() || cfg.sigma_out.is_some() {
        let spec = specs
            .first()
            .ok_or_else(|| SdrError::Parameter("no model selected".into()))?;
        if let Some(path) = &cfg.data_out {
            let mut stream = crate::rng::Substream::derive(cfg.seed, &[]);
            let (y, x) = generate_raw(spec, stream.rng());
            write_dataset_csv(path, &y, &x)?;
        }
        if let Some(path) = &cfg.basis_out {
            write_matrix_csv(path, &spec.true_basis)?;
        }
        if let Some(path) = &cfg.sigma_out {
            write_matrix_csv(path, &spec.population_sigma)?;
        }
    }
    let u_grid = if cfg.u.is_empty() {
        UGrid::default_fractions()
    } else if cfg.u.iter().all(|u| matches!(u, USpec::Fraction(_))) {
        UGrid::Fractions(cfg.u.iter().map(|u| if let USpec::Fraction(f) = u { *f } else { 0.0 }).collect())
    } else if cfg.u.iter().all(|u| matches!(u, USpec::Absolute(_))) {
        UGrid::Absolute(cfg.u.iter().map(|u| u.resolve(0)).collect())
    } else {
        return Err(SdrError::Parameter("mix of absolute and fractional envelope sizes".into()));
    };
    let echo = json!({
        "command": "simulate",
        "models": specs.iter().map(|s| json!({"model": s.kind, "n": s.n, "p": s.p, "sigma0": s.sigma0})).collect::<Vec<_>>(),
        "methods": cfg.methods,
        "u_grid": u_grid,
        "replicates": cfg.replicates,
        "partitions": cfg.partitions,
        "slices": cfg.slices,
        "c_n": cfg.c_n.map_or(json!("sqrt-n"), |c| json!(c)),
        "seed": cfg.seed,
    });
    let report = if cfg.replicates > 0 {
        let plan = ExperimentPlan {
            models: specs,
            methods: cfg.methods.clone(),
            u_grid,
            replicates: cfg.replicates,
            seed: cfg.seed,
            workers: cfg.workers,
            slices: cfg.slices,
            partitions: cfg.partitions,
            c_n: cfg.c_n,
        };
        Some(run_experiment(&plan)?)
    } else {
        None
    };
    Ok(SimulateOutput {
        report,
        config_echo: echo,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub score: SubspaceScore,
    pub config_echo: serde_json::Value,
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let basis = v.get("fit").and_then(|f| f.get("basis")).or_else(|| v.get("basis")).ok_or_else(|| {
            SdrError::Ingestion {
                row: 0,
                column: 0,
                message: format!("{} has no basis field", path.display()),
            }
        })?;
        let rows: Vec<Vec<f64>> = serde_json::from_value(basis.clone())?;
        let table = crate::data::NumericTable { header: None, rows };
        Ok(table.to_matrix())
    } else {
        Ok(read_numeric_csv(path)?.to_matrix())
    }
}

/// Scores an estimated basis against a true one. Σ defaults to the identity.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalOutput> {
    let b_est = read_matrix(require(&cfg.basis, "basis")?)?;
    let b_true = read_matrix(require(&cfg.true_basis, "true-basis")?)?;
    let sigma = match &cfg.sigma {
        Some(p) => read_matrix(p)?,
        None => DMatrix::identity(b_true.nrows(), b_true.nrows()),
    };
    let score = SubspaceScore::compute(&b_est, &b_true, &sigma)?;
    Ok(EvalOutput {
        score,
        config_echo: json!({
            "command": "eval",
            "basis": cfg.basis.as_ref().map(|p| p.display().to_string()),
            "true_basis": cfg.true_basis.as_ref().map(|p| p.display().to_string()),
            "sigma": cfg.sigma.as_ref().map_or(json!("identity"), |p| json!(p.display().to_string())),
        }),
    })
}

/// Downsamples a long-table recording file into a `y,x1..xp` CSV.
pub fn cmd_eeg_prep(cfg: &RunConfig) -> Result<serde_json::Value> {
    let input = require(&cfg.input, "input")?;
    let output = require(&cfg.output, "output")?;
    let layout = EegLayout {
        time_points: cfg.time_points,
        channels: cfg.channels,
        block: cfg.block,
    };
    let samples = read_eeg_long_csv(input)?;
    let (y, x) = eeg_matrix(&samples, &layout)?;
    write_dataset_csv(output, &y, &x)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for v in y.iter() {
        *counts.entry(crate::data::format_float(*v)).or_default() += 1;
    }
    Ok(json!({
        "n": x.nrows(),
        "p": x.ncols(),
        "class_counts": counts,
        "config_echo": {
            "command": "eeg-prep",
            "input": input.display().to_string(),
            "time_points": layout.time_points,
            "channels": layout.channels,
            "block": layout.block,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_spec_parsing() {
        assert_eq!("30".parse::<USpec>().unwrap(), USpec::Absolute(30));
        assert_eq!("0.3n".parse::<USpec>().unwrap(), USpec::Fraction(0.3));
        assert!("0".parse::<USpec>().is_err());
        assert!("x".parse::<USpec>().is_err());
        assert_eq!(USpec::Fraction(0.3).resolve(100), 30);
    }

    #[test]
    fn default_grid_dedupes_small_n() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.resolve_u(100), vec![10, 20, 30, 40, 50]);
        assert_eq!(cfg.resolve_u(3), vec![1]);
    }

    #[test]
    fn keys_accept_both_spellings() {
        let mut cfg = RunConfig::default();
        cfg.apply("fixed_basis", "true").unwrap();
        cfg.apply("c-n", "4.5").unwrap();
        cfg.apply("u", "10, 0.2n").unwrap();
        assert!(cfg.fixed_basis);
        assert_eq!(cfg.c_n, Some(4.5));
        assert_eq!(cfg.u, vec![USpec::Absolute(10), USpec::Fraction(0.2)]);
        assert!(cfg.apply("bogus", "1").is_err());
    }
}
