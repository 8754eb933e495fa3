//! Monte-Carlo study of the estimators on simulated factor panels.
//!
//! Each replication draws fresh model parameters and a panel, computes the
//! population precision matrix, and scores every configured estimator on
//! the same panel. Replications are seeded from `(base_seed, n, rep)` only,
//! so adding grid points or methods never changes existing cells, and the
//! outcome does not depend on the number of worker threads.

mod dgp;
mod io;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_precision, EstimatorSpec, Method};
use crate::factor_model::{self, FactorModelParams};
use crate::linalg::{self, Matrix};

pub use dgp::{gen_params, rep_seed, sample_panel, synthetic_panel};
pub use io::{
    read_cells_csv, write_cells_csv, write_summary_json, write_sweep_csv, CELL_HEADER, SWEEP_HEADER,
};

/// Largest tolerated gap between the two population precision computations.
pub const GROUND_TRUTH_TOL: f64 = 1e-8;

/// Estimation error of `theta_hat` against `theta_true`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `(1/p²) Σ_ij |Θ̂_ij − Θ_ij|`.
    pub mean_abs: f64,
    /// `max_j ‖Θ̂_j − Θ_j‖₂` over rows.
    pub max_row_l2: f64,
}

pub fn error_metrics(theta_hat: &Matrix, theta_true: &Matrix) -> Result<ErrorMetrics> {
    if theta_hat.shape() != theta_true.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", theta_true.nrows(), theta_true.ncols()),
            found: format!("{}x{}", theta_hat.nrows(), theta_hat.ncols()),
        });
    }
    let diff = theta_hat - theta_true;
    let count = diff.len().max(1) as f64;
    let mean_abs = diff.iter().map(|v| v.abs()).sum::<f64>() / count;
    let max_row_l2 = diff.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    Ok(ErrorMetrics {
        mean_abs,
        max_row_l2,
    })
}

/// How the number of assets follows the sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimensions {
    /// `p = round(gamma · n)`.
    Ratio(f64),
    /// Every listed `p` for every `n`.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k_true: usize,
    pub n_grid: Vec<usize>,
    pub dims: Dimensions,
    pub n_reps: usize,
    pub methods: Vec<EstimatorSpec>,
    pub base_seed: u64,
    /// Loading multipliers for [`snr_sweep`].
    pub alpha_grid: Option<Vec<f64>>,
}

impl SimConfig {
    /// `K = 3`, `n ∈ {100, 200, 400}`, `p = 3n/2`, 100 replications, with
    /// ridgeless, PCR with 3 and 20 components, and feasible adaptive PCR.
    pub fn table_design() -> Self {
        Self {
            k_true: 3,
            n_grid: vec![100, 200, 400],
            dims: Dimensions::Ratio(1.5),
            n_reps: 100,
            methods: vec![
                EstimatorSpec::rre(),
                EstimatorSpec::pcr_fixed(3),
                EstimatorSpec::pcr_fixed(20),
                EstimatorSpec::pcr_adaptive(),
            ],
            base_seed: 1,
            alpha_grid: None,
        }
    }

    /// `K = 20`, `n = 400`, `p = 450`, loadings scaled by `α ∈ {0.1, …, 1.5}`,
    /// ridgeless against PCR with the true number of components.
    pub fn sweep_design() -> Self {
        Self {
            k_true: 20,
            n_grid: vec![400],
            dims: Dimensions::Explicit(vec![450]),
            n_reps: 100,
            methods: vec![EstimatorSpec::rre(), EstimatorSpec::pcr_fixed(20)],
            base_seed: 1,
            alpha_grid: Some(default_alpha_grid()),
        }
    }

    /// `(n, p)` pairs in grid order.
    pub fn designs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n_grid {
            match &self.dims {
                Dimensions::Ratio(g) => out.push((n, (g * n as f64).round() as usize)),
                Dimensions::Explicit(ps) => out.extend(ps.iter().map(|&p| (n, p))),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.k_true == 0 {
            return bad("k_true must be at least 1".into());
        }
        if self.n_reps == 0 {
            return bad("n_reps must be at least 1".into());
        }
        if self.n_grid.is_empty() {
            return bad("n_grid is empty".into());
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        if let Dimensions::Ratio(g) = self.dims {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if let Dimensions::Explicit(ps) = &self.dims {
            if ps.is_empty() {
                return bad("p grid is empty".into());
            }
        }
        for (n, p) in self.designs() {
            if n < 10 {
                return bad(format!("n = {n} is below the minimum of 10"));
            }
            if p < self.k_true + 2 {
                return bad(format!("p = {p} must be at least K + 2 = {}", self.k_true + 2));
            }
        }
        for m in &self.methods {
            m.validate()?;
        }
        if let Some(grid) = &self.alpha_grid {
            if grid.is_empty() {
                return bad("alpha grid is empty".into());
            }
            if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                return bad(format!("alpha values must be positive, got {a}"));
            }
        }
        Ok(())
    }
}

/// `{0.1, 0.2, …, 1.5}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=15).map(|i| i as f64 / 10.0).collect()
}

/// One replication of one method on one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub k_true: usize,
    pub rep: usize,
    pub mean_abs_error: f64,
    pub max_row_l2_error: f64,
    /// Number of rows that used each component count.
    pub selected_k_histogram: BTreeMap<usize, usize>,
}

/// Mean and standard error of a metric over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub se: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let r = values.len();
        if r == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / r as f64;
        let se = if r > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            (var / r as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub k_true: usize,
    pub n_reps: usize,
    pub mean_abs_error: Moments,
    pub max_row_l2_error: Moments,
    /// Share of rows over all replications that used the true factor count.
    pub share_k_true: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub cells: Vec<McCell>,
    pub summaries: Vec<McSummary>,
}

impl McResult {
    pub fn summary(&self, method: &str, n: usize, p: usize) -> Option<&McSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.n == n && s.p == p)
    }
}

/// Population precision with the two independent computations cross-checked.
pub fn verified_truth(params: &FactorModelParams) -> Result<Matrix> {
    let rows = factor_model::precision_factor_rows(params)?.theta;
    let direct = factor_model::precision_direct(&factor_model::assemble_covariance(params))?;
    let diff = linalg::max_abs_diff(&rows, &direct);
    if !(diff <= GROUND_TRUTH_TOL) {
        return Err(Error::GroundTruthMismatch { diff });
    }
    Ok(rows)
}

fn score(
    panel: &Matrix,
    params: &FactorModelParams,
    truth: &Matrix,
    spec: &EstimatorSpec,
) -> Result<(ErrorMetrics, BTreeMap<usize, usize>)> {
    let sigma = (spec.method == Method::PcrElbow).then(|| params.idio_var());
    let est = estimate_precision(panel, spec, sigma)?;
    let metrics = error_metrics(&est.theta, truth)?;
    let mut hist = BTreeMap::new();
    for k in est.k_used() {
        *hist.entry(k).or_insert(0) += 1;
    }
    Ok((metrics, hist))
}

/// Runs every `(design, replication)` job and scores each method.
pub fn run_mc(config: &SimConfig) -> Result<McResult> {
    config.validate()?;
    let jobs: Vec<(usize, usize, usize)> = config
        .designs()
        .into_iter()
        .flat_map(|(n, p)| (0..config.n_reps).map(move |rep| (n, p, rep)))
        .collect();

    let per_job: Vec<Vec<McCell>> = jobs
        .par_iter()
        .map(|&(n, p, rep)| {
            let seed = rep_seed(config.base_seed, n, rep);
            let params = gen_params(config.k_true, p, seed)?;
            let panel = sample_panel(&params, n, seed);
            let truth = verified_truth(&params)
                .map_err(|e| e.context(format!("ground truth n={n} p={p} rep={rep}")))?;
            config
                .methods
                .iter()
                .map(|spec| {
                    let (m, hist) = score(&panel, &params, &truth, spec).map_err(|e| {
                        e.context(format!("{} n={n} p={p} rep={rep}", spec.label()))
                    })?;
                    Ok(McCell {
                        method: spec.label(),
                        n,
                        p,
                        k_true: config.k_true,
                        rep,
                        mean_abs_error: m.mean_abs,
                        max_row_l2_error: m.max_row_l2,
                        selected_k_histogram: hist,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    // cells ordered by (method, n, p, rep) in configuration order
    let mut cells = Vec::with_capacity(per_job.len() * config.methods.len());
    for mi in 0..config.methods.len() {
        for job in &per_job {
            cells.push(job[mi].clone());
        }
    }
    let summaries = summarize(&cells, config);
    Ok(McResult { cells, summaries })
}

fn summarize(cells: &[McCell], config: &SimConfig) -> Vec<McSummary> {
    let mut out = Vec::new();
    for spec in &config.methods {
        let label = spec.label();
        for (n, p) in config.designs() {
            let group: Vec<&McCell> = cells
                .iter()
                .filter(|c| c.method == label && c.n == n && c.p == p)
                .collect();
            if group.is_empty() {
                continue;
            }
            let ma: Vec<f64> = group.iter().map(|c| c.mean_abs_error).collect();
            let ml: Vec<f64> = group.iter().map(|c| c.max_row_l2_error).collect();
            let (hit, total) = group.iter().fold((0, 0), |(h, t), c| {
                let rows: usize = c.selected_k_histogram.values().sum();
                let at = c.selected_k_histogram.get(&config.k_true).copied().unwrap_or(0);
                (h + at, t + rows)
            });
            out.push(McSummary {
                method: label.clone(),
                n,
                p,
                k_true: config.k_true,
                n_reps: group.len(),
                mean_abs_error: Moments::of(&ma),
                max_row_l2_error: Moments::of(&ml),
                share_k_true: hit as f64 / total.max(1) as f64,
            });
        }
    }
    out
}

/// One point of the signal-to-noise curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub n: usize,
    pub p: usize,
    /// `ξ̄` averaged over replications.
    pub xi_bar: f64,
    pub method: String,
    pub mean_abs_error: Moments,
    pub max_row_l2_error: Moments,
}

/// Scales the loadings by each `α` and reruns the replications.
///
/// Within a replication every `α` shares the same parameter draw and the
/// same factor and noise draws, so the curves differ only through `α`.
pub fn snr_sweep(config: &SimConfig) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let alphas = config
        .alpha_grid
        .clone()
        .ok_or_else(|| Error::InvalidParams("the sweep needs an alpha grid".into()))?;
    let n_methods = config.methods.len();
    let mut out = Vec::new();
    for (n, p) in config.designs() {
        // per replication: for each alpha, (xi_bar, metrics per method)
        let reps: Vec<Vec<(f64, Vec<ErrorMetrics>)>> = (0..config.n_reps)
            .into_par_iter()
            .map(|rep| {
                let seed = rep_seed(config.base_seed, n, rep);
                let base = gen_params(config.k_true, p, seed)?;
                alphas
                    .iter()
                    .map(|&alpha| {
                        let ctx = |e: Error| e.context(format!("alpha={alpha} n={n} p={p} rep={rep}"));
                        let params = base.scale_loadings(alpha).map_err(ctx)?;
                        let xi_bar = factor_model::snr(&params).map_err(ctx)?.xi_bar;
                        let panel = sample_panel(&params, n, seed);
                        let truth = verified_truth(&params).map_err(ctx)?;
                        let metrics = config
                            .methods
                            .iter()
                            .map(|spec| score(&panel, &params, &truth, spec).map(|(m, _)| m))
                            .collect::<Result<Vec<_>>>()
                            .map_err(ctx)?;
                        Ok((xi_bar, metrics))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (ai, &alpha) in alphas.iter().enumerate() {
            let xi: Vec<f64> = reps.iter().map(|r| r[ai].0).collect();
            let xi_bar = Moments::of(&xi).mean;
            for mi in 0..n_methods {
                let ma: Vec<f64> = reps.iter().map(|r| r[ai].1[mi].mean_abs).collect();
                let ml: Vec<f64> = reps.iter().map(|r| r[ai].1[mi].max_row_l2).collect();
                out.push(SweepPoint {
                    alpha,
                    n,
                    p,
                    xi_bar,
                    method: config.methods[mi].label(),
                    mean_abs_error: Moments::of(&ma),
                    max_row_l2_error: Moments::of(&ml),
                });
            }
        }
    }
    Ok(out)
}
