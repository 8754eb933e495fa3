//! Command-line front end: `estimate`, `simulate`, `sweep` and `backtest`.
//!
//! Exit codes are 0 on success, 2 for usage and configuration errors, 3 for
//! data errors and 4 for numerical degeneracy. Failures print a one-line
//! JSON error record on stderr and remove any files the run had written.

mod config;
mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};

pub use config::{
    BacktestSettings, Command, ConfigFile, PanelSettings, RunConfig, DEFAULT_OUTPUT, OUTPUT_ENV,
};
pub use run::run;

#[derive(Debug, Parser)]
#[command(name = "latent-precision", version, about = "Dense precision-matrix estimation under hidden factors")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Estimate the precision matrix of a returns panel.
    Estimate(Flags),
    /// Monte-Carlo error table over sample sizes and methods.
    Simulate(Flags),
    /// Error against loading strength (signal-to-noise sweep).
    Sweep(Flags),
    /// Rolling-window portfolio backtest.
    Backtest(Flags),
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

#[derive(Debug, Args)]
struct Flags {
    /// Configuration file (TOML sections run, estimator, sim, backtest, panel).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,

    /// Returns CSV (`date,asset1,...`); a synthetic panel is used if absent.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output directory [default: $LATENT_PRECISION_OUT or ./out].
    #[arg(long, short = 'o', value_name = "DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    threads: Option<usize>,

    /// rre, pcr-<k>f, pcr-adaptive or pcr-elbow.
    #[arg(long)]
    method: Option<String>,
    /// Components for fixed-count PCR.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    mu_scale: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    c_delta: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = parse_bool)]
    demean: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_parser = parse_bool)]
    symmetrize: Option<bool>,
    /// spectral or dense.
    #[arg(long)]
    solver: Option<String>,

    /// True number of factors in simulations.
    #[arg(long)]
    k_true: Option<usize>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// p = gamma * n.
    #[arg(long, conflicts_with = "p")]
    gamma: Option<f64>,
    /// Explicit numbers of assets, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Methods to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Loading multipliers, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,

    /// Estimation window length.
    #[arg(long)]
    n_in: Option<usize>,
    /// Transaction cost in basis points.
    #[arg(long)]
    cost_bps: Option<f64>,
    /// msr or gmv.
    #[arg(long)]
    portfolio: Option<String>,

    /// Factors of the synthetic panel.
    #[arg(long)]
    panel_k: Option<usize>,
    /// Periods of the synthetic panel.
    #[arg(long)]
    panel_n: Option<usize>,
    /// Assets of the synthetic panel.
    #[arg(long)]
    panel_p: Option<usize>,
    /// Multiplier turning simulated draws into decimal returns.
    #[arg(long)]
    panel_scale: Option<f64>,
}

impl Flags {
    fn to_file(&self) -> ConfigFile {
        let mut f = ConfigFile::default();
        f.run.input = self.input.clone();
        f.run.output_dir = self.output_dir.clone();
        f.run.seed = self.seed;
        f.run.threads = self.threads;
        f.estimator.method = self.method.clone();
        f.estimator.k = self.k;
        f.estimator.kappa = self.kappa;
        f.estimator.mu_scale = self.mu_scale;
        f.estimator.c0 = self.c0;
        f.estimator.c_delta = self.c_delta;
        f.estimator.demean = self.demean;
        f.estimator.symmetrize = self.symmetrize;
        f.estimator.solver = self.solver.clone();
        f.sim.k_true = self.k_true;
        f.sim.n = self.n.clone();
        f.sim.gamma = self.gamma;
        f.sim.p = self.p.clone();
        f.sim.reps = self.reps;
        f.sim.methods = self.methods.clone();
        f.sim.alpha = self.alpha.clone();
        f.backtest.n_in = self.n_in;
        f.backtest.cost_bps = self.cost_bps;
        f.backtest.portfolio = self.portfolio.clone();
        f.panel.k = self.panel_k;
        f.panel.n = self.panel_n;
        f.panel.p = self.panel_p;
        f.panel.scale = self.panel_scale;
        f
    }
}

/// What the command line asks for.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Run(RunConfig),
    PrintConfig(RunConfig),
    /// Help or version text, printed as is with exit code 0.
    Info(String),
}

/// Parses `argv` (program name first), reading the config file if one is
/// given. `env_output` is the value of [`OUTPUT_ENV`].
pub fn parse_config<I, T>(argv: I, env_output: Option<&str>) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Invocation::Info(text)),
                _ => Err(Error::Usage(text.trim_end().to_string())),
            };
        }
    };
    let (command, flags) = match cli.command {
        Cmd::Estimate(f) => (Command::Estimate, f),
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::Sweep(f) => (Command::Sweep, f),
        Cmd::Backtest(f) => (Command::Backtest, f),
    };
    let base = match &flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let resolved = RunConfig::resolve(command, &base.overlay(flags.to_file()), env_output)?;
    Ok(if flags.print_config {
        Invocation::PrintConfig(resolved)
    } else {
        Invocation::Run(resolved)
    })
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    kind: &'a str,
    class: &'a str,
    exit_code: i32,
    message: String,
}

/// One-line JSON describing `err`.
pub fn error_record(err: &Error) -> String {
    let class = err.class();
    let record = ErrorRecord {
        kind: err.kind(),
        class: match class {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Numerical => "numerical",
        },
        exit_code: exit_code(class),
        message: err.to_string(),
    };
    serde_json::json!({ "error": record }).to_string()
}

/// Full program: parse, run, report. Returns the process exit code.
pub fn main_with<I, T>(argv: I, env_output: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = parse_config(argv, env_output).and_then(|inv| match inv {
        Invocation::Info(text) => {
            let _ = write!(out, "{text}");
            Ok(())
        }
        Invocation::PrintConfig(cfg) => {
            let _ = write!(out, "{}", cfg.to_toml());
            Ok(())
        }
        Invocation::Run(cfg) => run(&cfg).map(|files| {
            for f in files {
                let _ = writeln!(out, "{}", f.display());
            }
        }),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            if let Error::Usage(text) = e.root() {
                let _ = writeln!(err, "{text}");
            }
            let _ = writeln!(err, "{}", error_record(&e));
            exit_code(e.class())
        }
    }
}

/// Entry point of the binary.
pub fn main_from_env() -> i32 {
    let env = std::env::var(OUTPUT_ENV).ok();
    main_with(
        std::env::args_os(),
        env.as_deref(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    )
}

#[cfg(test)]
mod tests;
