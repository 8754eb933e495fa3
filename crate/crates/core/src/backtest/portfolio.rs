//! Portfolio weights, Sharpe estimate and per-period accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Budget sums at or below this in magnitude cannot be normalized.
pub const MIN_BUDGET: f64 = 1e-12;

fn symmetric_part(theta: &Matrix) -> Matrix {
    (theta + theta.transpose()) * 0.5
}

fn budget_normalize(direction: Vector) -> Result<Vector> {
    let sum = direction.sum();
    if !(sum.abs() > MIN_BUDGET) {
        return Err(Error::DegenerateDirection { sum });
    }
    Ok(direction / sum)
}

fn check_square(theta: &Matrix, p: usize) -> Result<()> {
    if theta.shape() != (p, p) {
        return Err(Error::ShapeMismatch {
            expected: format!("{p}x{p}"),
            found: format!("{}x{}", theta.nrows(), theta.ncols()),
        });
    }
    Ok(())
}

/// Maximum-Sharpe weights `Θ_sym μ̂` scaled to unit budget.
pub fn msr_weights(mu_hat: &Vector, theta_hat: &Matrix) -> Result<Vector> {
    check_square(theta_hat, mu_hat.len())?;
    budget_normalize(symmetric_part(theta_hat) * mu_hat)
}

/// Global minimum-variance weights `Θ_sym 1 / (1ᵀ Θ_sym 1)`.
pub fn gmv_weights(theta_hat: &Matrix) -> Result<Vector> {
    let p = theta_hat.nrows();
    check_square(theta_hat, p)?;
    budget_normalize(symmetric_part(theta_hat) * Vector::from_element(p, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeEstimate {
    /// `sign(q) √|q|` with `q = μ̂ᵀ Θ̂ᵀ μ̂`.
    pub value: f64,
    /// `q < 0`: the estimate is not positive semi-definite along `μ̂`.
    pub negative_quadratic: bool,
}

/// Plug-in maximum Sharpe ratio.
pub fn sr_ms_estimate(mu_hat: &Vector, theta_hat: &Matrix) -> SharpeEstimate {
    let q = mu_hat.dot(&(theta_hat.transpose() * mu_hat));
    SharpeEstimate {
        value: if q < 0.0 { -(-q).sqrt() } else { q.sqrt() },
        negative_quadratic: q < 0.0,
    }
}

/// Weights at the end of a period: `w ∘ (1 + y) / (1 + wᵀy)`.
pub fn drifted_weights(w: &Vector, y_next: &Vector) -> Result<Vector> {
    let growth = 1.0 + w.dot(y_next);
    if !(growth > 0.0) {
        return Err(Error::PortfolioWipedOut { growth });
    }
    Ok(w.zip_map(y_next, |wi, yi| wi * (1.0 + yi)) / growth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodReturn {
    pub gross: f64,
    pub net: f64,
    pub turnover: f64,
}

/// Gross return of `w_new`, turnover against the drifted previous weights,
/// and the return net of proportional cost `c`.
pub fn net_return(w_new: &Vector, w_prev_drifted: &Vector, y_next: &Vector, c: f64) -> PeriodReturn {
    let gross = w_new.dot(y_next);
    let turnover = (w_new - w_prev_drifted).abs().sum();
    PeriodReturn {
        gross,
        net: gross - c * (1.0 + gross) * turnover,
        turnover,
    }
}
