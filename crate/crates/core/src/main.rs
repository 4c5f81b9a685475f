use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irp_sdr::pipeline::{cmd_classify, cmd_eeg_prep, cmd_eval, cmd_fit, cmd_simulate, RunConfig};
use irp_sdr::SdrError;
use serde::Serialize;

/// Integrated random-partition sufficient dimension reduction.
#[derive(Parser, Debug)]
#[command(name = "irpsdr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a central subspace basis from a CSV file
    Fit(Flags),
    /// Run the benchmark models, or write one generated dataset
    Simulate(Flags),
    /// Leave-one-out LDA accuracy after dimension reduction
    Classify(Flags),
    /// Median-downsample a long-table recording CSV
    EegPrep(Flags),
    /// Compare an estimated basis with a true one
    Eval(Flags),
}

/// Flags override values read from `--config`.
#[derive(Args, Debug, Default)]
struct Flags {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long, short)]
    output: Option<String>,
    /// Response column: 0-based index or header name
    #[arg(long)]
    response: Option<String>,
    /// Scale covariates to unit variance
    #[arg(long)]
    standardize: bool,
    /// Envelope sizes, comma separated; `0.3n` means 30% of n
    #[arg(long)]
    u: Option<String>,
    /// Random partitions per (u, r)
    #[arg(long)]
    partitions: Option<String>,
    /// SIR slices
    #[arg(long)]
    slices: Option<String>,
    /// Subspace dimension or `auto`
    #[arg(long, short)]
    d: Option<String>,
    /// BIC penalty (default sqrt(n))
    #[arg(long)]
    c_n: Option<String>,
    /// BIC direction: max or min
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// irp or pca
    #[arg(long)]
    method: Option<String>,
    /// Fit the direction once on all samples instead of per fold
    #[arg(long)]
    fixed_basis: bool,
    /// Benchmark models, e.g. M1,M3
    #[arg(long)]
    models: Option<String>,
    /// irp_sdr_bu, irp_sdr_ensemble, marginal_r1, pca_sdr
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    sigma0: Option<String>,
    /// Include wall time in the replicate CSV
    #[arg(long)]
    timing: bool,
    /// Aggregate JSON output for `simulate`
    #[arg(long)]
    summary: Option<String>,
    #[arg(long)]
    data_out: Option<String>,
    #[arg(long)]
    basis_out: Option<String>,
    #[arg(long)]
    sigma_out: Option<String>,
    /// Estimated basis (fit JSON or CSV)
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    true_basis: Option<String>,
    /// Covariance for the trace correlation (CSV); identity if absent
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    time_points: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    #[arg(long)]
    block: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let opts: [(&'static str, &Option<String>); 28] = [
            ("input", &self.input),
            ("output", &self.output),
            ("response", &self.response),
            ("u", &self.u),
            ("partitions", &self.partitions),
            ("slices", &self.slices),
            ("d", &self.d),
            ("c-n", &self.c_n),
            ("direction", &self.direction),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("method", &self.method),
            ("models", &self.models),
            ("methods", &self.methods),
            ("replicates", &self.replicates),
            ("n", &self.n),
            ("p", &self.p),
            ("sigma0", &self.sigma0),
            ("summary", &self.summary),
            ("data-out", &self.data_out),
            ("basis-out", &self.basis_out),
            ("sigma-out", &self.sigma_out),
            ("basis", &self.basis),
            ("true-basis", &self.true_basis),
            ("sigma", &self.sigma),
            ("time-points", &self.time_points),
            ("channels", &self.channels),
            ("block", &self.block),
        ];
        let mut out: Vec<(&'static str, String)> =
            opts.iter().filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone()))).collect();
        for (k, on) in [
            ("standardize", self.standardize),
            ("fixed-basis", self.fixed_basis),
            ("timing", self.timing),
        ] {
            if on {
                out.push((k, "true".into()));
            }
        }
        out
    }

    fn to_config(&self) -> Result<RunConfig, SdrError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.pairs() {
            cfg.apply(k, &v)?;
        }
        Ok(cfg)
    }
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<(), SdrError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: &Command) -> Result<(), SdrError> {
    let flags = match command {
        Command::Fit(f) | Command::Simulate(f) | Command::Classify(f) | Command::EegPrep(f) | Command::Eval(f) => f,
    };
    let cfg = flags.to_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| SdrError::Parameter(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Fit(_) => emit_json(&cmd_fit(&cfg)?, cfg.output.as_deref()),
        Command::Classify(_) => emit_json(&cmd_classify(&cfg)?, cfg.output.as_deref()),
        Command::Eval(_) => emit_json(&cmd_eval(&cfg)?, cfg.output.as_deref()),
        Command::EegPrep(_) => emit_json(&cmd_eeg_prep(&cfg)?, None),
        Command::Simulate(_) => {
            let out = cmd_simulate(&cfg)?;
            if let Some(report) = &out.report {
                match &cfg.output {
                    Some(path) => report.write_csv(path, cfg.timing)?,
                    None => emit_json(&report.aggregates, None)?,
                }
                if let Some(path) = &cfg.summary {
                    let summary = serde_json::json!({
                        "aggregates": report.aggregates,
                        "config_echo": out.config_echo,
                    });
                    emit_json(&summary, Some(path))?;
                }
            }
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irpsdr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
