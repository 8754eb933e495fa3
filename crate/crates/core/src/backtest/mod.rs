//! Rolling-window out-of-sample portfolio backtest.
//!
//! Window `i` uses rows `i .. i + n_I` of the panel to form weights, which
//! earn the returns of row `i + n_I`. Turnover compares the new weights with
//! the previous window's weights after they drifted through the previous
//! realized period; the first window starts from its own weights. A period
//! whose gross return is at or below −100% leaves nothing to drift, so the
//! next window rebuys its whole position from cash (turnover `‖w‖₁`) and is
//! flagged as a restart.

mod panel;
mod portfolio;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_precision, EstimatorSpec};
use crate::linalg::{Matrix, Vector};
use crate::output::{fmt_num, round_sig, rounded, write_csv, write_json};

pub use panel::{load_returns, month_range, parse_month, synthetic_returns, write_returns, ReturnsPanel};
pub use portfolio::{
    drifted_weights, gmv_weights, msr_weights, net_return, sr_ms_estimate, PeriodReturn,
    SharpeEstimate, MIN_BUDGET,
};

/// Shortest admissible estimation window.
pub const MIN_WINDOW: usize = 24;
/// Ten basis points.
pub const DEFAULT_COST: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Portfolio {
    Msr,
    Gmv,
}

impl FromStr for Portfolio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msr" => Ok(Portfolio::Msr),
            "gmv" => Ok(Portfolio::Gmv),
            _ => Err(Error::InvalidParams(format!(
                "unknown portfolio '{s}' (expected msr or gmv)"
            ))),
        }
    }
}

impl std::fmt::Display for Portfolio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Portfolio::Msr => "msr",
            Portfolio::Gmv => "gmv",
        })
    }
}

/// Weights chosen for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub weights: Vector,
    pub sharpe_estimate: Option<SharpeEstimate>,
}

/// Maps an estimation window (`n_I × p`) to portfolio weights.
pub trait WeightRule: Sync {
    fn label(&self) -> String;
    fn allocate(&self, window: &Matrix) -> Result<Allocation>;
}

/// Weights from a precision estimate of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRule {
    pub spec: EstimatorSpec,
    pub portfolio: Portfolio,
}

impl WeightRule for EstimatorRule {
    fn label(&self) -> String {
        format!("{} {}", self.spec.label(), self.portfolio.to_string().to_uppercase())
    }

    fn allocate(&self, window: &Matrix) -> Result<Allocation> {
        let theta = estimate_precision(window, &self.spec, None)?.theta;
        let mu = column_means(window);
        let weights = match self.portfolio {
            Portfolio::Msr => msr_weights(&mu, &theta)?,
            Portfolio::Gmv => gmv_weights(&theta)?,
        };
        Ok(Allocation {
            weights,
            sharpe_estimate: Some(sr_ms_estimate(&mu, &theta)),
        })
    }
}

/// `1/p` in every asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EqualWeight;

impl WeightRule for EqualWeight {
    fn label(&self) -> String {
        "EqualWeight".into()
    }

    fn allocate(&self, window: &Matrix) -> Result<Allocation> {
        let p = window.ncols();
        Ok(Allocation {
            weights: Vector::from_element(p, 1.0 / p as f64),
            sharpe_estimate: None,
        })
    }
}

pub fn column_means(y: &Matrix) -> Vector {
    Vector::from_fn(y.ncols(), |j, _| y.column(j).mean())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub index: usize,
    /// First date of the estimation window.
    pub window_start: String,
    /// Date of the realized out-of-sample return.
    pub realized: String,
    pub weights: Vec<f64>,
    pub gross: f64,
    pub net: f64,
    pub turnover: f64,
    /// The previous portfolio was wiped out and this one starts from cash.
    pub restarted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharpe_estimate: Option<SharpeEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub n_windows: usize,
    pub mean_gross: f64,
    pub sd_gross: f64,
    pub sharpe_gross: f64,
    pub mean_net: f64,
    pub sd_net: f64,
    pub sharpe_net: f64,
    pub avg_turnover: f64,
    /// Windows that followed a wiped-out period.
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub rule: String,
    pub n: usize,
    pub p: usize,
    pub n_in: usize,
    pub cost: f64,
    pub summary: BacktestSummary,
    pub per_window: Vec<WindowRecord>,
}

/// Mean and standard deviation with denominator `len − 1`.
fn mean_sd(x: &[f64]) -> (f64, f64) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0);
    (m, var.sqrt())
}

fn summarize(records: &[WindowRecord]) -> BacktestSummary {
    let gross: Vec<f64> = records.iter().map(|r| r.gross).collect();
    let net: Vec<f64> = records.iter().map(|r| r.net).collect();
    let (mean_gross, sd_gross) = mean_sd(&gross);
    let (mean_net, sd_net) = mean_sd(&net);
    BacktestSummary {
        n_windows: records.len(),
        mean_gross,
        sd_gross,
        sharpe_gross: mean_gross / sd_gross,
        mean_net,
        sd_net,
        sharpe_net: mean_net / sd_net,
        avg_turnover: records.iter().map(|r| r.turnover).sum::<f64>() / records.len() as f64,
        restarts: records.iter().filter(|r| r.restarted).count(),
    }
}

/// Runs `rule` over every window of length `n_in` with cost `c` per unit
/// of turnover.
pub fn run_backtest(
    panel: &ReturnsPanel,
    n_in: usize,
    rule: &dyn WeightRule,
    c: f64,
) -> Result<BacktestReport> {
    let n = panel.n();
    if n_in < MIN_WINDOW {
        return Err(Error::InvalidParams(format!(
            "window length {n_in} is below the minimum of {MIN_WINDOW}"
        )));
    }
    if n_in + 2 > n {
        return Err(Error::InvalidParams(format!(
            "window length {n_in} leaves fewer than two out-of-sample periods in {n} rows"
        )));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!("cost must be non-negative, got {c}")));
    }
    let y = panel.values();
    let dates = panel.dates();
    let mut records = Vec::with_capacity(n - n_in);
    let mut prev: Option<(Vector, Vector)> = None;
    for i in 0..n - n_in {
        let ctx = |e: Error| e.context(format!("window {i} ending {}", dates[i + n_in - 1]));
        let window = y.rows(i, n_in).into_owned();
        let alloc = rule.allocate(&window).map_err(ctx)?;
        let y_next = y.row(i + n_in).transpose();
        let (w_prev, restarted) = match &prev {
            None => (alloc.weights.clone(), false),
            Some((w, y_last)) => match drifted_weights(w, y_last) {
                Ok(d) => (d, false),
                Err(Error::PortfolioWipedOut { .. }) => (Vector::zeros(panel.p()), true),
                Err(e) => return Err(ctx(e)),
            },
        };
        let ret = net_return(&alloc.weights, &w_prev, &y_next, c);
        records.push(WindowRecord {
            index: i,
            window_start: dates[i].clone(),
            realized: dates[i + n_in].clone(),
            weights: alloc.weights.iter().copied().collect(),
            gross: ret.gross,
            net: ret.net,
            turnover: ret.turnover,
            restarted,
            sharpe_estimate: alloc.sharpe_estimate,
        });
        prev = Some((alloc.weights, y_next));
    }
    Ok(BacktestReport {
        rule: rule.label(),
        n,
        p: panel.p(),
        n_in,
        cost: c,
        summary: summarize(&records),
        per_window: records,
    })
}

/// Backtest of the `portfolio` built from `spec` estimates.
pub fn rolling_backtest(
    panel: &ReturnsPanel,
    n_in: usize,
    spec: &EstimatorSpec,
    portfolio: Portfolio,
    c: f64,
) -> Result<BacktestReport> {
    let rule = EstimatorRule {
        spec: spec.clone(),
        portfolio,
    };
    run_backtest(panel, n_in, &rule, c)
}

/// Copy with every number rounded to ten significant digits.
pub fn rounded_report(r: &BacktestReport) -> BacktestReport {
    let s = r.summary;
    BacktestReport {
        cost: round_sig(r.cost),
        summary: BacktestSummary {
            n_windows: s.n_windows,
            mean_gross: round_sig(s.mean_gross),
            sd_gross: round_sig(s.sd_gross),
            sharpe_gross: round_sig(s.sharpe_gross),
            mean_net: round_sig(s.mean_net),
            sd_net: round_sig(s.sd_net),
            sharpe_net: round_sig(s.sharpe_net),
            avg_turnover: round_sig(s.avg_turnover),
            restarts: s.restarts,
        },
        per_window: r
            .per_window
            .iter()
            .map(|w| WindowRecord {
                weights: rounded(&w.weights),
                gross: round_sig(w.gross),
                net: round_sig(w.net),
                turnover: round_sig(w.turnover),
                sharpe_estimate: w.sharpe_estimate.map(|e| SharpeEstimate {
                    value: round_sig(e.value),
                    ..e
                }),
                ..w.clone()
            })
            .collect(),
        ..r.clone()
    }
}

/// Summary block and per-window array as pretty JSON.
pub fn write_report_json(path: &Path, report: &BacktestReport) -> Result<()> {
    write_json(path, &rounded_report(report))
}

pub const WINDOW_HEADER: [&str; 8] = [
    "index",
    "window_start",
    "realized",
    "gross",
    "net",
    "turnover",
    "restarted",
    "sharpe_estimate",
];

/// One row per window under [`WINDOW_HEADER`], weights omitted.
pub fn write_windows_csv(path: &Path, report: &BacktestReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .per_window
        .iter()
        .map(|w| {
            vec![
                w.index.to_string(),
                w.window_start.clone(),
                w.realized.clone(),
                fmt_num(w.gross),
                fmt_num(w.net),
                fmt_num(w.turnover),
                w.restarted.to_string(),
                w.sharpe_estimate.map(|e| fmt_num(e.value)).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(path, &WINDOW_HEADER, &rows)
}
