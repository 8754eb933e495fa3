//! Single-row fits of the general linear class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

use super::EstimatorSpec;

/// Data-dependent complexity of one row fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    /// Rank of `Y_{-j} P_B`.
    pub r_hat: usize,
    /// Smallest retained squared singular value of `Y_{-j} P_B`, over `n`.
    pub eta_hat: f64,
    /// Largest squared singular value of `Y_{-j} M_B`, over `n`.
    pub psi_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFit {
    /// Regression coefficients on the other `p - 1` assets (asset `j` skipped).
    pub alpha: Vector,
    pub tau_sq: f64,
    /// Rank of the basis actually used.
    pub k_used: usize,
    pub complexity: Complexity,
    /// The diagonal came from `y_jᵀ y_j / n` because the row regression
    /// interpolates.
    pub interpolating: bool,
}

/// Residual variance used when the regression interpolates: `y_jᵀ y_j / n`.
pub fn tau_interpolating(y_j: &Vector, n: usize) -> f64 {
    y_j.norm_squared() / n as f64
}

/// Row `j` (0-based) of the general linear class:
/// `α̃ = B (Y_{-j} B)⁺ y_j`, `τ̃² = y_jᵀ (y_j − Y_{-j} α̃) / n`.
///
/// `b` is `(p − 1) × q` and may be empty. This is the dense reference
/// computation: it forms the projections explicitly and takes full SVDs.
pub fn fit_row_general(y: &Matrix, j: usize, b: &Matrix, spec: &EstimatorSpec) -> Result<RowFit> {
    let (n, p) = y.shape();
    if n < 2 || p < 2 {
        return Err(Error::InvalidParams(format!("need n >= 2 and p >= 2, got {n}x{p}")));
    }
    if j >= p {
        return Err(Error::InvalidParams(format!("row {j} out of range for p = {p}")));
    }
    if b.nrows() != p - 1 || b.ncols() > p - 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{}xq basis with q <= {}", p - 1, p - 1),
            found: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    linalg::check_finite(y)?;
    linalg::check_finite(b)?;

    let y_j = y.column(j).into_owned();
    let y_minus = linalg::drop_column(y, j);
    let nf = n as f64;

    let (alpha, complexity) = if b.ncols() == 0 {
        let top = linalg::svd(&y_minus)?.s.get(0).copied().unwrap_or(0.0);
        (
            Vector::zeros(p - 1),
            Complexity {
                r_hat: 0,
                eta_hat: 0.0,
                psi_hat: top * top / nf,
            },
        )
    } else {
        let z = &y_minus * b;
        let z_pinv = linalg::pinv(&z, linalg::default_rtol(z.nrows(), z.ncols()))?;
        let alpha = b * (z_pinv * &y_j);

        let b_pinv = linalg::pinv(b, linalg::default_rtol(b.nrows(), b.ncols()))?;
        let proj = b * b_pinv;
        let resid = Matrix::identity(p - 1, p - 1) - &proj;
        let kept = linalg::svd(&(&y_minus * &proj))?;
        let rtol = linalg::default_rtol(n, p - 1);
        let r_hat = kept.rank(rtol);
        let eta_hat = if r_hat == 0 {
            0.0
        } else {
            kept.s[r_hat - 1] * kept.s[r_hat - 1] / nf
        };
        let dropped = linalg::spectral_norm(&(&y_minus * resid))?;
        (
            alpha,
            Complexity {
                r_hat,
                eta_hat,
                psi_hat: dropped * dropped / nf,
            },
        )
    };

    let fitted = &y_minus * &alpha;
    let tau_sq = y_j.dot(&(&y_j - fitted)) / nf;
    if tau_sq <= spec.tau_floor {
        return Err(Error::DegenerateTau { row: j, tau_sq });
    }
    Ok(RowFit {
        k_used: b.ncols(),
        alpha,
        tau_sq,
        complexity,
        interpolating: false,
    })
}

/// Minimum-norm least squares row through one SVD of `Y_{-j}`, switching
/// to the interpolating diagonal when `Y_{-j}` reproduces `y_j`. `n` is the
/// sample size behind the rows of `y`.
pub(crate) fn dense_ridgeless_row(y: &Matrix, n: usize, j: usize, spec: &EstimatorSpec) -> Result<RowFit> {
    let (rows, p) = y.shape();
    let nf = n as f64;
    let y_j = y.column(j).into_owned();
    let y_minus = linalg::drop_column(y, j);
    let dec = linalg::svd(&y_minus)?;
    let rank = dec.rank(linalg::default_rtol(rows, p - 1));

    let mut alpha = Vector::zeros(p - 1);
    for i in 0..rank {
        let coef = dec.u.column(i).dot(&y_j) / dec.s[i];
        alpha += dec.vt.row(i).transpose() * coef;
    }
    let resid = &y_j - &y_minus * &alpha;
    let eta_hat = if rank == 0 {
        0.0
    } else {
        dec.s[rank - 1] * dec.s[rank - 1] / nf
    };
    let complexity = Complexity {
        r_hat: rank,
        eta_hat,
        psi_hat: 0.0,
    };
    finish_ridgeless(j, n, p, y_j, alpha, resid, rank == rows, complexity, spec)
}

/// Diagonal choice shared by the ridgeless paths: with at least `n`
/// regressors the fit is an interpolation when `Y_{-j}` has full row rank
/// or the residual vanishes relative to `y_j`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_ridgeless(
    j: usize,
    n: usize,
    p: usize,
    y_j: Vector,
    alpha: Vector,
    resid: Vector,
    full_row_rank: bool,
    complexity: Complexity,
    spec: &EstimatorSpec,
) -> Result<RowFit> {
    let interpolating =
        p > n && (full_row_rank || resid.norm() <= 1e-10 * y_j.norm());
    let tau_sq = if interpolating {
        tau_interpolating(&y_j, n)
    } else {
        y_j.dot(&resid) / n as f64
    };
    if tau_sq <= spec.tau_floor {
        return Err(Error::DegenerateTau { row: j, tau_sq });
    }
    Ok(RowFit {
        k_used: complexity.r_hat,
        alpha,
        tau_sq,
        complexity,
        interpolating,
    })
}
