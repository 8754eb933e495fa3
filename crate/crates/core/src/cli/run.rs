//! The four workflows and their artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Command, RunConfig};
use crate::backtest::{
    load_returns, month_range, rolling_backtest, write_report_json, write_returns,
    write_windows_csv, ReturnsPanel,
};
use crate::error::{Error, Result};
use crate::estimators::{estimate_precision, Method};
use crate::linalg::Vector;
use crate::output::{fmt_num, round_sig, write_csv, write_json, write_matrix_csv};
use crate::simulation::{run_mc, snr_sweep, synthetic_panel, write_cells_csv, write_summary_json, write_sweep_csv};

/// Files written so far, removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)
            .map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Runs the configured command and returns the files it wrote.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    let mut outs = Outputs::new(&cfg.output_dir)?;
    let result = pool.install(|| {
        fs::write(outs.file("config.toml"), cfg.to_toml())?;
        match cfg.command {
            Command::Estimate => estimate(cfg, &mut outs),
            Command::Simulate => simulate(cfg, &mut outs),
            Command::Sweep => sweep(cfg, &mut outs),
            Command::Backtest => backtest(cfg, &mut outs),
        }
    });
    match result {
        Ok(()) => Ok(outs.written),
        Err(e) => {
            outs.discard();
            Err(e)
        }
    }
}

/// The input panel, or a synthetic one (written to `panel.csv`) together
/// with its true error variances in the panel's units.
fn load_panel(cfg: &RunConfig, outs: &mut Outputs) -> Result<(ReturnsPanel, Option<Vector>)> {
    if let Some(path) = &cfg.input {
        let panel = load_returns(path).map_err(|e| e.context(path.display().to_string()))?;
        return Ok((panel, None));
    }
    let s = &cfg.panel;
    let (params, values) = synthetic_panel(s.k, s.n, s.p, cfg.seed, s.scale)?;
    let panel = ReturnsPanel::new(
        month_range("1995-01", s.n)?,
        (1..=s.p).map(|j| format!("a{j}")).collect(),
        values,
    )?;
    write_returns(&outs.file("panel.csv"), &panel)?;
    Ok((panel, Some(params.idio_var() * (s.scale * s.scale))))
}

fn elbow_needs_truth() -> Error {
    Error::Usage("pcr-elbow needs the true error variances, available only for synthetic panels".into())
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    method: String,
    n: usize,
    p: usize,
    interpolating: bool,
    r_bar: usize,
    eta_bar: f64,
    psi_bar: f64,
    assets: &'a [String],
}

fn estimate(cfg: &RunConfig, outs: &mut Outputs) -> Result<()> {
    let (panel, truth) = load_panel(cfg, outs)?;
    let sigma = match cfg.estimator.method {
        Method::PcrElbow => Some(truth.ok_or_else(elbow_needs_truth)?),
        _ => None,
    };
    let est = estimate_precision(panel.values(), &cfg.estimator, sigma.as_ref())?;
    write_matrix_csv(&outs.file("theta.csv"), &est.theta, Some(panel.assets()))?;
    let rows: Vec<Vec<String>> = est
        .rows
        .iter()
        .zip(panel.assets())
        .map(|(r, a)| {
            vec![
                a.clone(),
                fmt_num(r.tau_sq),
                r.k_used.to_string(),
                r.complexity.r_hat.to_string(),
                fmt_num(r.complexity.eta_hat),
                fmt_num(r.complexity.psi_hat),
                r.interpolating.to_string(),
            ]
        })
        .collect();
    write_csv(
        &outs.file("rows.csv"),
        &["asset", "tau_sq", "k_used", "r_hat", "eta_hat", "psi_hat", "interpolating"],
        &rows,
    )?;
    write_json(
        &outs.file("summary.json"),
        &EstimateSummary {
            method: cfg.estimator.label(),
            n: est.n,
            p: est.p,
            interpolating: est.interpolating,
            r_bar: est.r_bar(),
            eta_bar: round_sig(est.eta_bar()),
            psi_bar: round_sig(est.psi_bar()),
            assets: panel.assets(),
        },
    )
}

fn simulate(cfg: &RunConfig, outs: &mut Outputs) -> Result<()> {
    let res = run_mc(&cfg.sim)?;
    write_cells_csv(&outs.file("cells.csv"), &res)?;
    write_summary_json(&outs.file("summary.json"), &res, Some(&cfg.sim))
}

fn sweep(cfg: &RunConfig, outs: &mut Outputs) -> Result<()> {
    let points = snr_sweep(&cfg.sim)?;
    write_sweep_csv(&outs.file("sweep.csv"), &points)
}

fn backtest(cfg: &RunConfig, outs: &mut Outputs) -> Result<()> {
    if cfg.estimator.method == Method::PcrElbow {
        return Err(elbow_needs_truth());
    }
    let (panel, _) = load_panel(cfg, outs)?;
    let b = &cfg.backtest;
    let report = rolling_backtest(&panel, b.n_in, &cfg.estimator, b.portfolio, b.cost_bps * 1e-4)?;
    write_report_json(&outs.file("report.json"), &report)?;
    write_windows_csv(&outs.file("windows.csv"), &report)
}
