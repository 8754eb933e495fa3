//! Sectioned configuration file, flag overlay and resolution.
//!
//! The file is TOML with the sections `[run]`, `[estimator]`, `[sim]`,
//! `[backtest]` and `[panel]`. Every key is optional; unknown keys are an
//! error. Command-line flags fill the same structure and win over the file.
//! Defaults depend on the command: `simulate` starts from the K = 3 table
//! design, `sweep` from the K = 20 loading sweep, and `backtest` demeans
//! each estimation window unless `demean` is set explicitly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backtest::{Portfolio, DEFAULT_COST};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, Method, Solver};
use crate::simulation::{Dimensions, SimConfig};

/// Environment variable holding the default output directory.
pub const OUTPUT_ENV: &str = "LATENT_PRECISION_OUT";
pub const DEFAULT_OUTPUT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Estimate,
    Simulate,
    Sweep,
    Backtest,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub method: Option<String>,
    pub k: Option<usize>,
    pub kappa: Option<f64>,
    pub mu_scale: Option<f64>,
    pub c0: Option<f64>,
    pub c_delta: Option<f64>,
    pub demean: Option<bool>,
    pub symmetrize: Option<bool>,
    pub solver: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub k_true: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub gamma: Option<f64>,
    pub p: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    pub n_in: Option<usize>,
    pub cost_bps: Option<f64>,
    pub portfolio: Option<String>,
}

/// Synthetic panel used when no input file is given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSection {
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub scale: Option<f64>,
}

/// Unresolved settings from a file, flags, or both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub panel: PanelSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// `self` with every value set in `top` replaced by it.
    pub fn overlay(mut self, top: ConfigFile) -> Self {
        macro_rules! take {
            ($sec:ident: $($f:ident),*) => {
                $(if top.$sec.$f.is_some() { self.$sec.$f = top.$sec.$f; })*
            };
        }
        take!(run: input, output_dir, seed, threads);
        take!(estimator: method, k, kappa, mu_scale, c0, c_delta, demean, symmetrize, solver);
        take!(sim: k_true, n, reps, methods, alpha);
        // the two ways of giving p replace each other
        if top.sim.gamma.is_some() {
            self.sim.gamma = top.sim.gamma;
            self.sim.p = None;
        }
        if top.sim.p.is_some() {
            self.sim.p = top.sim.p;
            self.sim.gamma = None;
        }
        take!(backtest: n_in, cost_bps, portfolio);
        take!(panel: k, n, p, scale);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestSettings {
    pub n_in: usize,
    pub cost_bps: f64,
    pub portfolio: Portfolio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSettings {
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub scale: f64,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
    pub estimator: EstimatorSpec,
    pub sim: SimConfig,
    pub backtest: BacktestSettings,
    pub panel: PanelSettings,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_solver(s: &str) -> Result<Solver> {
    match s.to_ascii_lowercase().as_str() {
        "spectral" => Ok(Solver::Spectral),
        "dense" => Ok(Solver::Dense),
        _ => Err(usage(format!("unknown solver '{s}' (expected spectral or dense)"))),
    }
}

fn solver_name(s: Solver) -> &'static str {
    match s {
        Solver::Spectral => "spectral",
        Solver::Dense => "dense",
    }
}

/// Canonical lower-case name of a spec, accepted by `from_label`.
fn method_name(spec: &EstimatorSpec) -> String {
    spec.label().to_ascii_lowercase()
}

impl RunConfig {
    /// Applies command defaults to `file` and validates the result.
    /// `env_output` is the value of [`OUTPUT_ENV`], if set.
    pub fn resolve(command: Command, file: &ConfigFile, env_output: Option<&str>) -> Result<Self> {
        let e = &file.estimator;
        let tune = |mut spec: EstimatorSpec| -> Result<EstimatorSpec> {
            spec.kappa = e.kappa.unwrap_or(spec.kappa);
            spec.mu_scale = e.mu_scale.unwrap_or(spec.mu_scale);
            spec.c0 = e.c0.unwrap_or(spec.c0);
            spec.c_delta = e.c_delta.unwrap_or(spec.c_delta);
            spec.demean = e.demean.unwrap_or(spec.demean);
            spec.symmetrize = e.symmetrize.unwrap_or(spec.symmetrize);
            if let Some(s) = &e.solver {
                spec.solver = parse_solver(s)?;
            }
            spec.validate().map_err(|err| usage(err.to_string()))?;
            Ok(spec)
        };

        let estimator = match (&e.method, e.k) {
            (Some(m), k) => {
                let mut spec = EstimatorSpec::from_label(m)?;
                if let Some(k) = k {
                    if spec.method != Method::PcrFixed {
                        return Err(usage(format!("k only applies to pcr-<k>f, method is '{m}'")));
                    }
                    spec.k_fixed = k;
                }
                spec
            }
            (None, Some(k)) => EstimatorSpec::pcr_fixed(k),
            (None, None) => EstimatorSpec::pcr_adaptive(),
        };
        let mut estimator = tune(estimator)?;
        // interpolating fits of raw returns reproduce the window means, which
        // leaves no maximum-Sharpe direction, so backtests demean unless told
        if command == Command::Backtest && e.demean.is_none() {
            estimator.demean = true;
        }

        let seed = file.run.seed.unwrap_or(1);
        let s = &file.sim;
        let mut sim = match command {
            Command::Sweep => SimConfig::sweep_design(),
            _ => SimConfig::table_design(),
        };
        sim.base_seed = seed;
        if let Some(k) = s.k_true {
            sim.k_true = k;
        }
        if let Some(n) = &s.n {
            sim.n_grid = n.clone();
        }
        match (s.gamma, &s.p) {
            (Some(_), Some(_)) => return Err(usage("set either sim.gamma or sim.p, not both")),
            (Some(g), None) => sim.dims = Dimensions::Ratio(g),
            (None, Some(p)) => sim.dims = Dimensions::Explicit(p.clone()),
            (None, None) => {}
        }
        if let Some(r) = s.reps {
            sim.n_reps = r;
        }
        if let Some(ms) = &s.methods {
            sim.methods = ms.iter().map(|m| EstimatorSpec::from_label(m)).collect::<Result<_>>()?;
        }
        sim.methods = sim.methods.into_iter().map(tune).collect::<Result<_>>()?;
        if let Some(a) = &s.alpha {
            sim.alpha_grid = Some(a.clone());
        }
        if matches!(command, Command::Simulate | Command::Sweep) {
            sim.validate().map_err(|err| usage(err.to_string()))?;
        }

        let b = &file.backtest;
        let backtest = BacktestSettings {
            n_in: b.n_in.unwrap_or(240),
            cost_bps: b.cost_bps.unwrap_or(DEFAULT_COST * 1e4),
            portfolio: match &b.portfolio {
                Some(p) => Portfolio::from_str(p).map_err(|err| usage(err.to_string()))?,
                None => Portfolio::Msr,
            },
        };
        if !(backtest.cost_bps >= 0.0 && backtest.cost_bps.is_finite()) {
            return Err(usage(format!("cost_bps must be non-negative, got {}", backtest.cost_bps)));
        }

        let pn = &file.panel;
        let panel = PanelSettings {
            k: pn.k.unwrap_or(3),
            n: pn.n.unwrap_or(348),
            p: pn.p.unwrap_or(10),
            scale: pn.scale.unwrap_or(0.01),
        };
        if !(panel.scale > 0.0 && panel.scale.is_finite()) {
            return Err(usage(format!("panel scale must be positive, got {}", panel.scale)));
        }

        let output_dir = file
            .run
            .output_dir
            .clone()
            .or_else(|| env_output.filter(|s| !s.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));

        Ok(Self {
            command,
            input: file.run.input.clone(),
            output_dir,
            seed,
            threads: file.run.threads.unwrap_or(0),
            estimator,
            sim,
            backtest,
            panel,
        })
    }

    /// The resolved values as a complete file, loadable with
    /// [`ConfigFile::parse`].
    pub fn to_file(&self) -> ConfigFile {
        let e = &self.estimator;
        let (gamma, p) = match &self.sim.dims {
            Dimensions::Ratio(g) => (Some(*g), None),
            Dimensions::Explicit(ps) => (None, Some(ps.clone())),
        };
        ConfigFile {
            run: RunSection {
                input: self.input.clone(),
                output_dir: Some(self.output_dir.clone()),
                seed: Some(self.seed),
                threads: Some(self.threads),
            },
            estimator: EstimatorSection {
                method: Some(method_name(e)),
                k: (e.method == Method::PcrFixed).then_some(e.k_fixed),
                kappa: Some(e.kappa),
                mu_scale: Some(e.mu_scale),
                c0: Some(e.c0),
                c_delta: Some(e.c_delta),
                demean: Some(e.demean),
                symmetrize: Some(e.symmetrize),
                solver: Some(solver_name(e.solver).to_string()),
            },
            sim: SimSection {
                k_true: Some(self.sim.k_true),
                n: Some(self.sim.n_grid.clone()),
                gamma,
                p,
                reps: Some(self.sim.n_reps),
                methods: Some(self.sim.methods.iter().map(method_name).collect()),
                alpha: self.sim.alpha_grid.clone(),
            },
            backtest: BacktestSection {
                n_in: Some(self.backtest.n_in),
                cost_bps: Some(self.backtest.cost_bps),
                portfolio: Some(self.backtest.portfolio.to_string()),
            },
            panel: PanelSection {
                k: Some(self.panel.k),
                n: Some(self.panel.n),
                p: Some(self.panel.p),
                scale: Some(self.panel.scale),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}
