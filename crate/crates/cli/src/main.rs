//! `hvarx` command-line front end.
//!
//! Exit status: 0 on success, 1 on invalid input or configuration, 2 when a
//! solver hit its iteration limit (all artifacts are still written).

mod config;
mod report;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Environment variable that caps the worker thread count.
const THREADS_ENV: &str = "HVARX_THREADS";

#[derive(Debug)]
pub enum Failure {
    /// Bad input data, configuration or flags.
    Validation(String),
    /// Anything else that stopped the run.
    Runtime(String),
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure::Validation(msg.into())
    }
}

impl From<hvarx::VarxError> for Failure {
    fn from(e: hvarx::VarxError) -> Self {
        use hvarx::VarxError::*;
        match e {
            AllFitsFailed | EigenNoConvergence | BisectionNoConvergence(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

/// Outcome of a run that produced its artifacts.
pub enum Completion {
    Converged,
    NotConverged(String),
}

#[derive(Parser)]
#[command(name = "hvarx", version, about = "Sparse VARX estimation with hierarchical lag selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model; λ's are selected by cross-validation unless given.
    Fit(Flags),
    /// Select (λ_Φ, λ_B) by time-series cross-validation and fit the selected model.
    Cv(Flags),
    /// Compare the hierarchical and ℓ1 estimators by expanding-window forecasts.
    Evaluate(Flags),
    /// Write a synthetic stable VARX dataset with known lag structure.
    Simulate(Flags),
}

/// Every flag overrides the config-file key of the same name (dashes for underscores).
#[derive(Args, Default)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Endogenous series CSV (one column per series, optional leading `date` column).
    #[arg(long)]
    endo_path: Option<String>,
    /// Exogenous series CSV, aligned with the endogenous file.
    #[arg(long)]
    exog_path: Option<String>,
    /// Endogenous lag order or `auto` (⌊1.5√T⌋).
    #[arg(long)]
    p: Option<String>,
    /// Exogenous lag order or `auto` (⌊1.5√T⌋, 0 without exogenous data).
    #[arg(long)]
    s: Option<String>,
    /// `hvarx` (hierarchical) or `l1`.
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    lambda_phi: Option<String>,
    #[arg(long)]
    lambda_b: Option<String>,
    /// Points per λ axis.
    #[arg(long)]
    grid_points: Option<String>,
    /// Smallest λ as a fraction of λ_max.
    #[arg(long)]
    grid_ratio: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long)]
    validation_fraction: Option<String>,
    /// `warm_start` (sequential) or `parallel`.
    #[arg(long)]
    cv_mode: Option<String>,
    #[arg(long)]
    parallel_eval: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, short = 'o')]
    output_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// 0 = errors only, 1 = warnings, 2 = info, 3 = debug.
    #[arg(long, short = 'v')]
    verbosity: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    t_len: Option<String>,
    #[arg(long)]
    max_lag: Option<String>,
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    coefficient_scale: Option<String>,
    #[arg(long)]
    target_radius: Option<String>,
    #[arg(long)]
    innovation_sd: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
}

impl Flags {
    fn overrides(&self) -> BTreeMap<&'static str, String> {
        let pairs: [(&'static str, &Option<String>); 27] = [
            ("endo_path", &self.endo_path),
            ("exog_path", &self.exog_path),
            ("p", &self.p),
            ("s", &self.s),
            ("penalty", &self.penalty),
            ("lambda_phi", &self.lambda_phi),
            ("lambda_b", &self.lambda_b),
            ("grid_points", &self.grid_points),
            ("grid_ratio", &self.grid_ratio),
            ("test_fraction", &self.test_fraction),
            ("validation_fraction", &self.validation_fraction),
            ("cv_mode", &self.cv_mode),
            ("parallel_eval", &self.parallel_eval),
            ("max_iter", &self.max_iter),
            ("tol", &self.tol),
            ("output_dir", &self.output_dir),
            ("seed", &self.seed),
            ("verbosity", &self.verbosity),
            ("k", &self.k),
            ("m", &self.m),
            ("t_len", &self.t_len),
            ("max_lag", &self.max_lag),
            ("density", &self.density),
            ("coefficient_scale", &self.coefficient_scale),
            ("target_radius", &self.target_radius),
            ("innovation_sd", &self.innovation_sd),
            ("burn_in", &self.burn_in),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v.clone())))
            .collect()
    }

    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_flags(&self.overrides())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Error,
        1 => log::LevelFilter::Warn,
        2 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::validation(format!("environment variable {THREADS_ENV}: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    // Usage errors are validation errors (exit 1); 2 is reserved for non-convergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (name, flags) = match &cli.command {
        Command::Fit(f) => ("fit", f),
        Command::Cv(f) => ("cv", f),
        Command::Evaluate(f) => ("evaluate", f),
        Command::Simulate(f) => ("simulate", f),
    };
    let outcome = flags.resolve().and_then(|cfg| {
        init_logging(cfg.verbosity);
        init_threads()?;
        match name {
            "fit" => run::fit(&cfg),
            "cv" => run::cv(&cfg),
            "evaluate" => run::evaluate(&cfg),
            _ => run::simulate(&cfg),
        }
    });
    match outcome {
        Ok(Completion::Converged) => ExitCode::SUCCESS,
        Ok(Completion::NotConverged(what)) => {
            eprintln!("hvarx {name}: solver did not converge ({what}); artifacts were written with convergence flags");
            ExitCode::from(2)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("hvarx {name}: invalid input: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("hvarx {name}: {msg}");
            ExitCode::from(1)
        }
    }
}
