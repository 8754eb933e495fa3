//! Row-wise precision-matrix estimators of the form
//! `α̃_j = B (Y_{-j} B)⁺ y_j`, `Θ̃_jj = 1/τ̃_j²`, `Θ̃_{j,-j} = −α̃_jᵀ/τ̃_j²`.
//!
//! [`Method::Rre`] takes `B = I` (minimum-norm least squares, switching to
//! the interpolating diagonal when the regression fits `y_j` exactly). The
//! PCR methods take `B` as the top-`k` eigenvectors of `Y_{-j}ᵀY_{-j}/n`
//! with `k` fixed, chosen by the feasible threshold rule, or chosen by the
//! oracle elbow rule.
//!
//! The default solver obtains all row spectra from one decomposition of the
//! panel (see `spectral`); [`Solver::Dense`] runs an SVD per row and is kept
//! as a reference.

mod row;
mod select;
mod spectral;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

pub use row::{fit_row_general, tau_interpolating, Complexity, RowFit};
pub use select::{
    elbow_count, elbow_delta, feasible_count, feasible_k_bar, mu_n, select_k_elbow,
    select_k_feasible,
};

use spectral::{LeaveOneOut, RowSecular, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rre,
    PcrFixed,
    PcrAdaptive,
    PcrElbow,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rre" => Ok(Method::Rre),
            "pcr_fixed" | "pcr" => Ok(Method::PcrFixed),
            "pcr_adaptive" | "adaptive" => Ok(Method::PcrAdaptive),
            "pcr_elbow" | "elbow" => Ok(Method::PcrElbow),
            _ => Err(Error::Usage(format!(
                "unknown method '{s}' (expected rre, pcr_fixed, pcr_adaptive or pcr_elbow)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// All rows from one Gram decomposition, dense fallback per row.
    #[default]
    Spectral,
    /// One SVD of `Y_{-j}` per row.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub method: Method,
    /// Number of components for [`Method::PcrFixed`].
    pub k_fixed: usize,
    /// Feasible selection, `> 1`.
    pub kappa: f64,
    /// Feasible threshold scale: `μ_n = mu_scale · (n + p − 1)`.
    pub mu_scale: f64,
    /// Elbow multiplier `C₀ > 1`.
    pub c0: f64,
    /// Elbow noise multiplier `c_Δ > 1`.
    pub c_delta: f64,
    /// Subtract in-sample column means before fitting.
    pub demean: bool,
    /// Return `(Θ̃ + Θ̃ᵀ)/2`.
    pub symmetrize: bool,
    pub tau_floor: f64,
    pub solver: Solver,
}

impl EstimatorSpec {
    fn base(method: Method, k_fixed: usize) -> Self {
        Self {
            method,
            k_fixed,
            kappa: 2.0,
            mu_scale: 4.0,
            c0: 2.0,
            c_delta: 2.0,
            demean: false,
            symmetrize: false,
            tau_floor: 1e-10,
            solver: Solver::Spectral,
        }
    }

    pub fn rre() -> Self {
        Self::base(Method::Rre, 0)
    }

    pub fn pcr_fixed(k: usize) -> Self {
        Self::base(Method::PcrFixed, k)
    }

    pub fn pcr_adaptive() -> Self {
        Self::base(Method::PcrAdaptive, 0)
    }

    pub fn pcr_elbow() -> Self {
        Self::base(Method::PcrElbow, 0)
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("c0", self.c0), ("c_delta", self.c_delta)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must exceed 1, got {v}")));
            }
        }
        if !(self.mu_scale > 0.0 && self.mu_scale.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "mu_scale must be positive, got {}",
                self.mu_scale
            )));
        }
        if !(self.tau_floor >= 0.0 && self.tau_floor.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "tau_floor must be non-negative, got {}",
                self.tau_floor
            )));
        }
        Ok(())
    }

    /// Parses `rre`, `pcr-<k>f` (or `pcr-<k>`), `pcr-adaptive` and
    /// `pcr-elbow`, case-insensitively. Display labels parse back.
    pub fn from_label(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        let fixed = t
            .strip_prefix("pcr-")
            .map(|r| r.strip_suffix('f').unwrap_or(r))
            .and_then(|r| r.parse::<usize>().ok());
        match (t.as_str(), fixed) {
            (_, Some(k)) => Ok(Self::pcr_fixed(k)),
            ("rre", _) => Ok(Self::rre()),
            ("pcr-adaptive" | "adaptive", _) => Ok(Self::pcr_adaptive()),
            ("pcr-elbow" | "elbow", _) => Ok(Self::pcr_elbow()),
            _ => Err(Error::Usage(format!(
                "unknown method '{s}' (expected rre, pcr-<k>f, pcr-adaptive or pcr-elbow)"
            ))),
        }
    }

    /// Short display name, e.g. `RRE`, `PCR-3F`, `PCR-Adaptive`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Rre => "RRE".to_string(),
            Method::PcrFixed => format!("PCR-{}F", self.k_fixed),
            Method::PcrAdaptive => "PCR-Adaptive".to_string(),
            Method::PcrElbow => "PCR-Elbow".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub theta: Matrix,
    pub rows: Vec<RowFit>,
    pub spec: EstimatorSpec,
    pub n: usize,
    pub p: usize,
    /// At least one row used the interpolating diagonal.
    pub interpolating: bool,
}

impl PrecisionEstimate {
    /// `r̄ = max_j r̂_j`.
    pub fn r_bar(&self) -> usize {
        self.rows.iter().map(|r| r.complexity.r_hat).max().unwrap_or(0)
    }

    /// `η̄ = min_j η̂_j`.
    pub fn eta_bar(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.complexity.eta_hat)
            .fold(f64::INFINITY, f64::min)
    }

    /// `Ψ̄ = max_j Ψ̂_j`.
    pub fn psi_bar(&self) -> f64 {
        self.rows.iter().map(|r| r.complexity.psi_hat).fold(0.0, f64::max)
    }

    /// Per-row component counts.
    pub fn k_used(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.k_used).collect()
    }
}

/// Estimate the precision matrix of the columns of `y` (`n × p`).
///
/// `sigma_u` holds the true error variances and is required exactly when
/// the method is [`Method::PcrElbow`].
pub fn estimate_precision(
    y: &Matrix,
    spec: &EstimatorSpec,
    sigma_u: Option<&Vector>,
) -> Result<PrecisionEstimate> {
    spec.validate()?;
    let (n, p) = y.shape();
    if n < 2 || p < 2 {
        return Err(Error::InvalidParams(format!("need n >= 2 and p >= 2, got {n}x{p}")));
    }
    linalg::check_finite(y)?;
    match (spec.method, sigma_u) {
        (Method::PcrElbow, None) => {
            return Err(Error::InvalidParams(
                "the elbow rule needs the true error variances".into(),
            ))
        }
        (Method::PcrElbow, Some(s)) => {
            if s.len() != p {
                return Err(Error::ShapeMismatch {
                    expected: format!("{p} error variances"),
                    found: format!("{}", s.len()),
                });
            }
            linalg::check_finite_vec(s)?;
        }
        (_, Some(_)) => {
            return Err(Error::InvalidParams(
                "error variances are only used by the elbow rule".into(),
            ))
        }
        (_, None) => {}
    }
    if spec.method == Method::PcrFixed {
        let max = (p - 2).min(n);
        if spec.k_fixed > max {
            return Err(Error::KTooLarge {
                k: spec.k_fixed,
                max,
            });
        }
    }

    let data = if spec.demean { centered_rows(y) } else { y.clone() };

    let ctx = RowContext::new(&data, n, spec, sigma_u);
    let rows: Vec<RowFit> = (0..p)
        .into_par_iter()
        .map(|j| ctx.fit(j))
        .collect::<Result<_>>()?;

    let mut theta = Matrix::zeros(p, p);
    for (j, fit) in rows.iter().enumerate() {
        let diag = 1.0 / fit.tau_sq;
        theta[(j, j)] = diag;
        for (idx, &a) in fit.alpha.iter().enumerate() {
            let m = if idx < j { idx } else { idx + 1 };
            theta[(j, m)] = -a * diag;
        }
    }
    if spec.symmetrize {
        theta = (&theta + theta.transpose()) * 0.5;
    }
    let interpolating = rows.iter().any(|r| r.interpolating);
    Ok(PrecisionEstimate {
        theta,
        rows,
        spec: spec.clone(),
        n,
        p,
        interpolating,
    })
}

/// `Hᵀ Y` for an orthonormal basis `H` of the complement of the ones
/// vector: the in-sample demeaned panel expressed in `n − 1` rows. Every
/// Gram product, and hence every row fit, equals the one of the centered
/// `n × p` panel, but the Gram matrix keeps full rank.
fn centered_rows(y: &Matrix) -> Matrix {
    let n = y.nrows();
    // Householder reflection P = I − 2wwᵀ/wᵀw with P 1/√n = e₁
    let mut w = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    w[0] -= 1.0;
    let ww = w.norm_squared();
    let py = if ww == 0.0 {
        y.clone()
    } else {
        y - &w * (w.tr_mul(y) * (2.0 / ww))
    };
    py.rows(1, n - 1).into_owned()
}

/// Shared per-panel state for the row loop.
struct RowContext<'a> {
    /// Panel the rows are fitted on (`n − 1` rows when demeaned).
    y: &'a Matrix,
    /// Sample size used in divisors and regime rules.
    n_obs: usize,
    spec: &'a EstimatorSpec,
    sigma_u: Option<&'a Vector>,
    engine: Option<LeaveOneOut<'a>>,
    /// Inverse of the decomposed Gram matrix (`YᵀY` or `YYᵀ`) for ridgeless
    /// rows, when it is well conditioned.
    gram_inv: Option<Matrix>,
}

impl<'a> RowContext<'a> {
    fn new(y: &'a Matrix, n_obs: usize, spec: &'a EstimatorSpec, sigma_u: Option<&'a Vector>) -> Self {
        let engine = match spec.solver {
            Solver::Spectral => Some(LeaveOneOut::new(y)),
            Solver::Dense => None,
        };
        let gram_inv = match (&engine, spec.method) {
            (Some(e), Method::Rre) => e.gram_inverse(),
            _ => None,
        };
        Self {
            y,
            n_obs,
            spec,
            sigma_u,
            engine,
            gram_inv,
        }
    }

    fn fit(&self, j: usize) -> Result<RowFit> {
        let fast = match &self.engine {
            Some(engine) => match engine.row(j) {
                Some(sec) => match self.spec.method {
                    Method::Rre => self.fast_ridgeless(engine, &sec)?,
                    _ => Some(self.fast_pcr(engine, &sec)?),
                },
                None => None,
            },
            None => None,
        };
        match fast {
            Some(fit) => Ok(fit),
            None => self.dense(j),
        }
    }

    fn k_for(&self, j: usize, sq_desc: &dyn Fn(usize) -> Vec<f64>, frob_sq: f64) -> Result<usize> {
        let (rows, p) = self.y.shape();
        let n = self.n_obs;
        let pm = p - 1;
        let dim = rows.min(pm);
        match self.spec.method {
            Method::Rre => unreachable!("ridgeless rows do not select components"),
            Method::PcrFixed => Ok(self.spec.k_fixed),
            Method::PcrAdaptive => {
                let mu = mu_n(n, pm, self.spec.mu_scale);
                let k_bar = feasible_k_bar(n, pm, self.spec.kappa, mu).min(dim);
                let values = sq_desc(k_bar);
                Ok(feasible_count(
                    &values,
                    frob_sq,
                    n,
                    pm,
                    self.spec.kappa,
                    self.spec.mu_scale,
                ))
            }
            Method::PcrElbow => {
                let sigma = self.sigma_u.expect("checked by estimate_precision");
                let others: Vec<f64> = (0..p).filter(|&m| m != j).map(|m| sigma[m]).collect();
                let threshold = self.spec.c0 * elbow_delta(&others, n, self.spec.c_delta);
                // λ̂_k = σ_k²/n descends, so walk down until it drops below
                let mut k = 0;
                let mut fetched = 1.min(dim);
                while fetched > 0 {
                    let values = sq_desc(fetched);
                    k = values
                        .iter()
                        .take_while(|&&s| s / n as f64 >= threshold)
                        .count();
                    if k < values.len() || fetched == dim {
                        break;
                    }
                    fetched = (2 * fetched).min(dim);
                }
                Ok(k)
            }
        }
    }

    fn fast_pcr(&self, engine: &LeaveOneOut<'_>, sec: &RowSecular<'_, '_>) -> Result<RowFit> {
        let j = sec.j();
        let nf = self.n_obs as f64;
        let dim = engine.row_dim().min(self.y.nrows());
        let k = self.k_for(j, &|c| sec.top_values(c), engine.frob_sq_without(j))?;
        let k = Self::check_k(k, dim)?;
        let eig = sec.top_eigen((k + 1).min(dim));
        let values = &eig.values;
        if k > 0 && values[k - 1] <= rank_floor(engine) {
            return Err(Error::KTooLarge { k, max: k - 1 });
        }

        let q = engine.vectors();
        let gram_values = engine.values();
        let coeffs = sec.coeffs();
        let mut s = Vector::zeros(gram_values.len());
        let mut explained = 0.0;
        for i in 0..k {
            let c = &eig.coeffs[i];
            let proj = match engine.side() {
                // uᵢᵀ y_j with uᵢ = Q c
                Side::Rows => c.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>(),
                // vᵢᵀ Y_{-j}ᵀ y_j = Σ_m c_m λ_m Q_{jm}
                Side::Columns => c
                    .iter()
                    .zip(gram_values)
                    .zip(coeffs)
                    .map(|((a, l), b)| a * l * b)
                    .sum::<f64>(),
            };
            s.axpy(proj / values[i], c, 1.0);
            explained += match engine.side() {
                Side::Rows => proj * proj,
                Side::Columns => proj * proj / values[i],
            };
        }
        let alpha = match engine.side() {
            Side::Rows => linalg::drop_entry(&self.y.tr_mul(&(q * &s)), j),
            Side::Columns => linalg::drop_entry(&(q * &s), j),
        };
        let tau_sq = (engine.col_sq(j) - explained) / nf;
        if tau_sq <= self.spec.tau_floor {
            return Err(Error::DegenerateTau { row: j, tau_sq });
        }
        let complexity = Complexity {
            r_hat: k,
            eta_hat: if k == 0 { 0.0 } else { values[k - 1] / nf },
            psi_hat: values.get(k).map_or(0.0, |v| v.max(0.0) / nf),
        };
        Ok(RowFit {
            alpha,
            tau_sq,
            k_used: k,
            complexity,
            interpolating: false,
        })
    }

    /// Ridgeless row from the shared inverse; `None` defers to the dense path.
    ///
    /// The Gram inverse squares the conditioning of the row problem, so the
    /// solution gets one step of iterative refinement against `Y_{-j}`.
    fn fast_ridgeless(
        &self,
        engine: &LeaveOneOut<'_>,
        sec: &RowSecular<'_, '_>,
    ) -> Result<Option<RowFit>> {
        let Some(h) = &self.gram_inv else {
            return Ok(None);
        };
        let j = sec.j();
        let (rows, p) = self.y.shape();
        let n = self.n_obs;
        let nf = n as f64;
        let smallest = sec.smallest_value();
        if smallest <= rank_floor(engine) {
            return Ok(None);
        }
        let y = self.y;
        let y_j = y.column(j).into_owned();
        let complexity = Complexity {
            r_hat: engine.row_dim().min(rows),
            eta_hat: smallest / nf,
            psi_hat: 0.0,
        };
        // Y_{-j} a, with `a` indexed over the other assets
        let apply = |a: &Vector| y * pad_entry(a, j);

        let (alpha, full_row_rank) = match engine.side() {
            Side::Columns => {
                // (Y_{-j}ᵀY_{-j})⁻¹ is the Schur complement of H = (YᵀY)⁻¹
                let hjj = h[(j, j)];
                if hjj <= 0.0 {
                    return Ok(None);
                }
                let normal_solve = |g: &Vector| {
                    let u = h * pad_entry(g, j);
                    let full = &u - h.column(j) * (u[j] / hjj);
                    linalg::drop_entry(&full, j)
                };
                let mut alpha = linalg::drop_entry(&(h.column(j) * (-1.0 / hjj)), j);
                let resid = &y_j - apply(&alpha);
                alpha += normal_solve(&linalg::drop_entry(&y.tr_mul(&resid), j));
                (alpha, false)
            }
            Side::Rows => {
                // (G − y yᵀ)⁻¹ r = G⁻¹r + G⁻¹y (yᵀG⁻¹r) / (1 − yᵀG⁻¹y)
                let w = h * &y_j;
                let denom = 1.0 - y_j.dot(&w);
                if denom <= 1e-8 {
                    return Ok(None);
                }
                let min_norm = |r: &Vector| {
                    let g = h * r;
                    let v = &g + &w * (y_j.dot(&g) / denom);
                    linalg::drop_entry(&y.tr_mul(&v), j)
                };
                let mut alpha = min_norm(&y_j);
                let resid = &y_j - apply(&alpha);
                alpha += min_norm(&resid);
                (alpha, true)
            }
        };
        let resid = &y_j - apply(&alpha);
        row::finish_ridgeless(j, n, p, y_j, alpha, resid, full_row_rank, complexity, self.spec)
            .map(Some)
    }

    fn check_k(k: usize, dim: usize) -> Result<usize> {
        if k > dim {
            return Err(Error::KTooLarge { k, max: dim });
        }
        Ok(k)
    }

    fn dense(&self, j: usize) -> Result<RowFit> {
        if self.spec.method == Method::Rre {
            return row::dense_ridgeless_row(self.y, self.n_obs, j, self.spec);
        }
        let (rows, p) = self.y.shape();
        let nf = self.n_obs as f64;
        let y_j = self.y.column(j).into_owned();
        let y_minus = linalg::drop_column(self.y, j);
        let dec = linalg::svd(&y_minus)?;
        let sq: Vec<f64> = dec.s.iter().map(|s| s * s).collect();
        let dim = sq.len();
        let k = self.k_for(j, &|c| sq[..c.min(dim)].to_vec(), y_minus.norm_squared())?;
        let k = Self::check_k(k, dim)?;
        let rank = dec.rank(linalg::default_rtol(rows, p - 1));
        if k > rank {
            return Err(Error::KTooLarge { k, max: rank });
        }
        let mut alpha = Vector::zeros(p - 1);
        let mut explained = 0.0;
        for i in 0..k {
            let proj = dec.u.column(i).dot(&y_j);
            alpha.axpy(proj / dec.s[i], &dec.vt.row(i).transpose(), 1.0);
            explained += proj * proj;
        }
        let tau_sq = (y_j.norm_squared() - explained) / nf;
        if tau_sq <= self.spec.tau_floor {
            return Err(Error::DegenerateTau { row: j, tau_sq });
        }
        Ok(RowFit {
            alpha,
            tau_sq,
            k_used: k,
            complexity: Complexity {
                r_hat: k,
                eta_hat: if k == 0 { 0.0 } else { sq[k - 1] / nf },
                psi_hat: sq.get(k).map_or(0.0, |v| v / nf),
            },
            interpolating: false,
        })
    }
}

/// Copy of `v` with a zero inserted at position `j`.
fn pad_entry(v: &Vector, j: usize) -> Vector {
    v.clone().insert_row(j, 0.0)
}

/// Eigenvalues at or below this are treated as zero.
fn rank_floor(engine: &LeaveOneOut<'_>) -> f64 {
    engine.scale() * linalg::default_rtol(engine.n(), engine.p()) * 100.0
}
