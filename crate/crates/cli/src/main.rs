//! `poissonproj`: simulate Poisson regression data, fit penalized projection
//! estimators and run Monte Carlo studies.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 1 otherwise.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poissonproj::bench::{quantile_bands_with_threads, rate_study, run_benchmark_with_threads};
use poissonproj::sampler::simulate_dataset;
use poissonproj::selection::select_model;
use poissonproj::{ModelCollection, Sample};
use serde_json::json;
use thiserror::Error;

use config::Settings;

pub const THREADS_ENV: &str = "POISSONPROJ_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<poissonproj::Error> for CliError {
    fn from(e: poissonproj::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "poissonproj", version, about = "Adaptive projection estimators for Poisson regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it as CSV `x,y`.
    Simulate(SimulateArgs),
    /// Select a model for a CSV dataset and write a JSON report.
    Fit(FitArgs),
    /// Monte Carlo benchmark of the selected estimator (JSON report).
    Benchmark(RunArgs),
    /// Pointwise quantile bands of the selected estimator (CSV).
    Bands(RunArgs),
    /// Mean error across sample sizes and its log-log slope (JSON).
    Rates(RunArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    /// iid | mixing
    #[arg(long, default_value = "iid")]
    design: String,
    #[arg(long)]
    ar_coefficient: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// piecewise | const:<c> | cosine:<level>:<amplitude>
    #[arg(long, default_value = "piecewise")]
    intensity: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct PenaltyArgs {
    /// known-xi | plugin | dependent | practical
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    /// Number of uniform cells of the plug-in partition.
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    strict_partition: bool,
    /// natural | binary (practical penalty only)
    #[arg(long)]
    log_base: Option<String>,
}

impl PenaltyArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        for (key, value) in [
            ("penalty", &self.penalty),
            ("xi", &self.xi),
            ("kappa", &self.kappa),
            ("cells", &self.cells),
            ("log_base", &self.log_base),
        ] {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if self.strict_partition {
            s.set("strict_partition", "true")?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// trig | hist
    #[arg(long, default_value = "hist")]
    family: String,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` or JSON config; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    ar_coefficient: Option<String>,
    #[arg(long)]
    noise_sd: Option<String>,
    #[arg(long)]
    intensity: Option<String>,
    #[arg(long)]
    family: Option<String>,
    /// penalized | oracle | fixed:<m>
    #[arg(long)]
    selection: Option<String>,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    panels: Option<String>,
    /// Grid resolution for quantile bands.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated sample sizes for rate studies.
    #[arg(long)]
    ns: Option<String>,
    /// Worker threads; the report does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::parse(&read_input(path)?)?,
            None => Settings::default(),
        };
        for (key, value) in [
            ("n", &self.n),
            ("replicates", &self.replicates),
            ("design", &self.design),
            ("ar_coefficient", &self.ar_coefficient),
            ("noise_sd", &self.noise_sd),
            ("intensity", &self.intensity),
            ("family", &self.family),
            ("selection", &self.selection),
            ("seed", &self.seed),
            ("panels", &self.panels),
            ("grid", &self.grid),
            ("ns", &self.ns),
        ] {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        self.penalty.apply(&mut s)?;
        Ok(s)
    }

    fn threads(&self) -> Result<usize, CliError> {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            return match v.trim().parse::<usize>() {
                Ok(t) if t > 0 => Ok(t),
                _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer"))),
            };
        }
        match self.threads {
            Some(0) => Err(CliError::Usage("--threads must be >= 1".into())),
            Some(t) => Ok(t),
            None => Ok(poissonproj::bench::default_threads()),
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    debug_assert!(content.ends_with('\n'));
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Internal(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

/// CSV `x,y` with `x` at 17 significant digits.
fn dataset_csv(sample: &Sample) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in sample.iter() {
        out.push_str(&format!("{x:.16e},{y}\n"));
    }
    out
}

fn parse_dataset(text: &str) -> Result<Sample, CliError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.replace(' ', "") == "x,y") {
            continue;
        }
        let bad = || CliError::Usage(format!("data line {}: expected `x,y`, got `{line}`", i + 1));
        let (x, y) = line.split_once(',').ok_or_else(bad)?;
        xs.push(x.trim().parse::<f64>().map_err(|_| bad())?);
        ys.push(y.trim().parse::<u64>().map_err(|_| bad())?);
    }
    if xs.is_empty() {
        return Err(CliError::Usage("dataset is empty".into()));
    }
    Ok(Sample::new(xs, ys)?)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut s = Settings::default();
    s.set("design", &args.design)?;
    if let Some(a) = args.ar_coefficient {
        s.set("ar_coefficient", &a.to_string())?;
    }
    if let Some(v) = args.noise_sd {
        s.set("noise_sd", &v.to_string())?;
    }
    let design = s.design()?;
    let intensity = config::parse_intensity(&args.intensity)?.build()?;
    let sample = simulate_dataset(&intensity, &design, args.n, args.seed)?;
    write_output(args.out.as_deref(), &dataset_csv(&sample))
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let mut s = Settings::default();
    args.penalty.apply(&mut s)?;
    let penalty = s.penalty()?;
    let family = config::parse_family(&args.family)?;
    let sample = parse_dataset(&read_input(&args.data)?)?;
    let collection = ModelCollection::default_for(family, sample.len())?;
    let result = select_model(&sample, &collection, &penalty)?;
    let report = json!({
        "family": family,
        "penalty": penalty,
        "n": sample.len(),
        "chosen_m": result.chosen_index,
        "chosen_dim": result.estimate.model().dim(),
        "coefficients": result.estimate.coefficients(),
        "mu_hat": result.mu_hat,
        "table": result.table,
    });
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn cmd_benchmark(args: &RunArgs) -> Result<(), CliError> {
    let config = args.settings()?.benchmark(500, None)?;
    let report = run_benchmark_with_threads(&config, args.threads()?)?;
    write_output(args.out.as_deref(), &report.to_json())
}

fn cmd_bands(args: &RunArgs) -> Result<(), CliError> {
    let s = args.settings()?;
    let config = s.benchmark(100, None)?;
    let grid = match s.get("grid") {
        Some(g) => g
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid grid `{g}`")))?,
        None => 201,
    };
    let band = quantile_bands_with_threads(&config, grid, args.threads()?)?;
    write_output(args.out.as_deref(), &band.to_csv())
}

fn cmd_rates(args: &RunArgs) -> Result<(), CliError> {
    let s = args.settings()?;
    let ns = s.ns()?;
    let first = *ns.first().ok_or_else(|| CliError::Usage("`ns` is empty".into()))?;
    let config = s.benchmark(100, Some(first))?;
    let study = rate_study(&config, &ns, args.threads()?)?;
    write_output(args.out.as_deref(), &study.to_json())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Bands(a) => cmd_bands(a),
        Command::Rates(a) => cmd_rates(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("poissonproj: {e}");
            ExitCode::from(e.code())
        }
    }
}
