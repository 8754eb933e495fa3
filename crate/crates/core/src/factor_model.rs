//! Population side of the hidden factor model `y_t = Aᵀ f_t + u_t`.
//!
//! Loadings are stored as a `K × p` matrix whose column `j` is the loading
//! vector of asset `j`. The idiosyncratic covariance is diagonal and kept as
//! its diagonal only. The precision matrix is available two independent
//! ways: row-by-row through the factor representation of each nodewise
//! regression ([`precision_factor_rows`]) and by dense inversion of the
//! assembled covariance ([`precision_direct`]).

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Rows whose residual variance falls to or below this are degenerate.
pub const TAU_DEGENERACY: f64 = 1e-12;
/// Condition number beyond which direct inversion is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModelParams {
    loadings: Matrix,
    factor_cov: Matrix,
    factor_mean: Vector,
    idio_var: Vector,
}

impl FactorModelParams {
    /// Validates and builds a parameter set.
    ///
    /// `loadings` is `K × p`, `factor_cov` `K × K` SPD, `factor_mean` length
    /// `K`, `idio_var` the strictly positive diagonal of the error covariance.
    pub fn new(
        loadings: Matrix,
        factor_cov: Matrix,
        factor_mean: Vector,
        idio_var: Vector,
    ) -> Result<Self> {
        let (k, p) = loadings.shape();
        if factor_cov.shape() != (k, k) {
            return Err(Error::ShapeMismatch {
                expected: format!("{k}x{k} factor covariance"),
                found: format!("{}x{}", factor_cov.nrows(), factor_cov.ncols()),
            });
        }
        if factor_mean.len() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("factor mean of length {k}"),
                found: factor_mean.len().to_string(),
            });
        }
        if idio_var.len() != p {
            return Err(Error::ShapeMismatch {
                expected: format!("idiosyncratic variances of length {p}"),
                found: idio_var.len().to_string(),
            });
        }
        if k + 1 >= p {
            return Err(Error::InvalidParams(format!(
                "need p > K + 1, got K = {k}, p = {p}"
            )));
        }
        linalg::check_finite(&loadings)?;
        linalg::check_finite_vec(&factor_mean)?;
        linalg::check_finite_vec(&idio_var)?;
        linalg::check_symmetric(&factor_cov)?;
        if Cholesky::new(factor_cov.clone()).is_none() {
            return Err(Error::NotPositiveDefinite("factor covariance".into()));
        }
        if let Some(bad) = idio_var.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidParams(format!(
                "idiosyncratic variance of asset {bad} is not positive"
            )));
        }
        Ok(Self {
            loadings,
            factor_cov,
            factor_mean,
            idio_var,
        })
    }

    pub fn n_factors(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn loadings(&self) -> &Matrix {
        &self.loadings
    }

    pub fn factor_cov(&self) -> &Matrix {
        &self.factor_cov
    }

    pub fn factor_mean(&self) -> &Vector {
        &self.factor_mean
    }

    /// Diagonal of the idiosyncratic covariance.
    pub fn idio_var(&self) -> &Vector {
        &self.idio_var
    }

    pub fn idio_cov(&self) -> Matrix {
        Matrix::from_diagonal(&self.idio_var)
    }

    /// Same model with every loading multiplied by `alpha`.
    pub fn scale_loadings(&self, alpha: f64) -> Result<Self> {
        Self::new(
            &self.loadings * alpha,
            self.factor_cov.clone(),
            self.factor_mean.clone(),
            self.idio_var.clone(),
        )
    }

    /// Mean of the asset vector, `Aᵀ μ_f`.
    pub fn asset_mean(&self) -> Vector {
        self.loadings.tr_mul(&self.factor_mean)
    }
}

/// Population precision matrix assembled from per-row regressions.
#[derive(Debug, Clone)]
pub struct PopulationPrecision {
    pub theta: Matrix,
    pub tau_sq: Vector,
    /// `alpha_star[j]` has length `p - 1` and skips asset `j`.
    pub alpha_star: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    /// Signal-to-noise ratio of each row.
    pub xi: Vec<f64>,
    pub xi_bar: f64,
    /// Smallest and largest `‖Σ_{U,-j}‖₂` over rows.
    pub delta_n: f64,
    pub r_n: f64,
    /// `max_j ‖A_{-j}‖₂`.
    pub d1n: f64,
    /// `max_j ‖a_jᵀ Σ_f A_{-j}ᵀ‖₂`.
    pub d2n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub r_w1: f64,
    pub r_w2: f64,
}

/// `Σ = Aᵀ Σ_f A + Σ_u`.
pub fn assemble_covariance(params: &FactorModelParams) -> Matrix {
    let a = params.loadings();
    let mut sigma = a.transpose() * params.factor_cov() * a;
    for (j, v) in params.idio_var().iter().enumerate() {
        sigma[(j, j)] += v;
    }
    // exact symmetry
    let sym = (&sigma + sigma.transpose()) * 0.5;
    sym
}

/// `Σ⁻¹` by Cholesky, refusing matrices with condition number above `1e12`.
pub fn precision_direct(sigma: &Matrix) -> Result<Matrix> {
    linalg::check_symmetric(sigma)?;
    let eig = linalg::sym_eigenvalues_desc(sigma)?;
    let p = sigma.nrows();
    if p == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let (hi, lo) = (eig[0], eig[p - 1]);
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        let condition = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
        return Err(Error::SingularSigma { condition });
    }
    let chol = Cholesky::new(sigma.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("covariance".into()))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Factor-rotated quantities shared by all rows: `Ā = Σ_f^{1/2} A` and
/// `M = Σ_m ā_m ā_mᵀ / σ_m²`.
struct RotatedLoadings {
    bar: Matrix,
    weighted_gram: Matrix,
}

impl RotatedLoadings {
    fn new(params: &FactorModelParams) -> Result<Self> {
        let root = linalg::sqrt_spd(params.factor_cov())?;
        let bar = root * params.loadings();
        let k = bar.nrows();
        let mut weighted_gram = Matrix::zeros(k, k);
        for (col, &var) in bar.column_iter().zip(params.idio_var().iter()) {
            weighted_gram.ger(1.0 / var, &col, &col, 1.0);
        }
        Ok(Self { bar, weighted_gram })
    }

    /// `(τ_j², α*_j)` for one row.
    fn row(&self, params: &FactorModelParams, j: usize) -> Result<(f64, Vector)> {
        let k = self.bar.nrows();
        let p = self.bar.ncols();
        let a_j = self.bar.column(j).into_owned();
        let var_j = params.idio_var()[j];

        // Ḡ_j = I + Ā_{-j}ᵀ Σ_{U,-j}⁻¹ Ā_{-j}
        let mut g = Matrix::identity(k, k) + &self.weighted_gram;
        g.ger(-1.0 / var_j, &a_j, &a_j, 1.0);
        let chol = Cholesky::new(g.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(format!("G matrix of row {j}")))?;
        let b = chol.solve(&a_j);

        // α*_j = Σ_{U,-j}⁻¹ Ā_{-j} Ḡ_j⁻¹ ā_j, entries for m ≠ j
        let mut alpha = Vector::zeros(p - 1);
        for (idx, m) in (0..p).filter(|&m| m != j).enumerate() {
            alpha[idx] = self.bar.column(m).dot(&b) / params.idio_var()[m];
        }
        // āᵀ Ā_{-j}ᵀ Σ⁻¹ Ā_{-j} Ḡ⁻¹ ā = āᵀ (Ḡ - I) Ḡ⁻¹ ā
        let shrink = a_j.dot(&(&g * &b - &b));
        let tau_sq = a_j.dot(&a_j) + var_j - shrink;
        if tau_sq <= TAU_DEGENERACY {
            return Err(Error::DegenerateTau { row: j, tau_sq });
        }
        Ok((tau_sq, alpha))
    }
}

/// Population precision matrix built one nodewise regression at a time
/// from the factor representation (diagonal `1/τ_j²`, off-diagonal
/// `-α*_jᵀ/τ_j²`).
pub fn precision_factor_rows(params: &FactorModelParams) -> Result<PopulationPrecision> {
    let rot = RotatedLoadings::new(params)?;
    let p = params.n_assets();
    let mut theta = Matrix::zeros(p, p);
    let mut tau_sq = Vector::zeros(p);
    let mut alpha_star = Vec::with_capacity(p);
    for j in 0..p {
        let (tau, alpha) = rot.row(params, j)?;
        theta[(j, j)] = 1.0 / tau;
        for (idx, m) in (0..p).filter(|&m| m != j).enumerate() {
            theta[(j, m)] = -alpha[idx] / tau;
        }
        tau_sq[j] = tau;
        alpha_star.push(alpha);
    }
    Ok(PopulationPrecision {
        theta,
        tau_sq,
        alpha_star,
    })
}

/// Population regression coefficients of asset `j` (0-based) on all others.
pub fn alpha_star(params: &FactorModelParams, j: usize) -> Result<Vector> {
    let p = params.n_assets();
    if j >= p {
        return Err(Error::InvalidParams(format!("row {j} out of range for p = {p}")));
    }
    let rot = RotatedLoadings::new(params)?;
    Ok(rot.row(params, j)?.1)
}

/// Signal-to-noise ratios and loading/noise norms.
pub fn snr(params: &FactorModelParams) -> Result<DiagnosticsBundle> {
    let p = params.n_assets();
    let a = params.loadings();
    let root = linalg::sqrt_spd(params.factor_cov())?;
    let bar = &root * a;
    let bar_gram = &bar * bar.transpose();
    let raw_gram = a * a.transpose();
    // cross[(j, m)] = a_jᵀ Σ_f a_m
    let cross = a.transpose() * params.factor_cov() * a;

    // top two idiosyncratic variances give ‖Σ_{U,-j}‖₂ for every j
    let var = params.idio_var();
    let (mut first, mut second) = (0usize, usize::MAX);
    for j in 1..p {
        if var[j] > var[first] {
            second = first;
            first = j;
        } else if second == usize::MAX || var[j] > var[second] {
            second = j;
        }
    }

    let mut xi = Vec::with_capacity(p);
    let (mut delta_n, mut r_n, mut d1n, mut d2n) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..p {
        let noise = if j == first { var[second] } else { var[first] };
        delta_n = delta_n.min(noise);
        r_n = r_n.max(noise);

        // λ_K(A_{-j} Σ_f A_{-j}ᵀ) equals the smallest eigenvalue of Ā_{-j}ᵀĀ_{-j}
        let mut g = bar_gram.clone();
        let col = bar.column(j);
        g.ger(-1.0, &col, &col, 1.0);
        let lam = linalg::sym_eigenvalues_desc(&g)?;
        let lambda_k = lam[lam.len() - 1];
        if lambda_k <= 1e-12 {
            return Err(Error::RankDeficientLoadings {
                row: j,
                lambda: lambda_k,
            });
        }
        xi.push(lambda_k / noise);

        let mut h = raw_gram.clone();
        let raw_col = a.column(j);
        h.ger(-1.0, &raw_col, &raw_col, 1.0);
        let top = linalg::sym_eigenvalues_desc(&h)?[0].max(0.0);
        d1n = d1n.max(top.sqrt());

        let row_norm_sq: f64 = (0..p)
            .filter(|&m| m != j)
            .map(|m| cross[(j, m)] * cross[(j, m)])
            .sum();
        d2n = d2n.max(row_norm_sq.sqrt());
    }
    let xi_bar = xi.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DiagnosticsBundle {
        xi,
        xi_bar,
        delta_n,
        r_n,
        d1n,
        d2n,
    })
}

/// Convergence rates for the off-diagonal row estimates.
///
/// `r_bar`, `eta_bar` and `psi_bar` are the worst-case complexity terms
/// over rows (max, min and max respectively).
pub fn rate_bounds(
    k: usize,
    n: usize,
    xi_bar: f64,
    delta_n: f64,
    r_bar: f64,
    eta_bar: f64,
    psi_bar: f64,
) -> Result<RateBounds> {
    let positive = [
        ("K", k as f64),
        ("n", n as f64),
        ("xi_bar", xi_bar),
        ("delta_n", delta_n),
        ("r_bar", r_bar),
        ("eta_bar", eta_bar),
    ];
    for (name, v) in positive {
        if !(v > 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
        }
    }
    if !(psi_bar >= 0.0) {
        return Err(Error::InvalidParams(format!("psi_bar must be >= 0, got {psi_bar}")));
    }
    let k = k as f64;
    let n = n as f64;
    let ratio = k / xi_bar;
    let r_w1 = [
        ((n.ln() + r_bar) / (n * eta_bar)).sqrt(),
        (ratio / delta_n).sqrt(),
        (ratio * (psi_bar / eta_bar) / delta_n).sqrt(),
        (ratio / eta_bar).sqrt(),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let r_w2 = r_w1.max(ratio.sqrt());
    Ok(RateBounds { r_w1, r_w2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_params(k: usize, p: usize, seed: u64) -> FactorModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loadings = Matrix::from_fn(k, p, |_, _| rng.random_range(-1.0..1.5));
        let b = Matrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let factor_cov = &b * b.transpose() + Matrix::identity(k, k);
        let factor_mean = Vector::from_fn(k, |_, _| rng.random_range(0.0..1.0));
        let idio = Vector::from_fn(p, |_, _| rng.random_range(0.5..3.0));
        FactorModelParams::new(loadings, factor_cov, factor_mean, idio).unwrap()
    }

    #[test]
    fn zero_loadings_give_idiosyncratic_covariance() {
        let idio = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let params = FactorModelParams::new(
            Matrix::zeros(1, 4),
            Matrix::identity(1, 1),
            Vector::zeros(1),
            idio.clone(),
        )
        .unwrap();
        assert_eq!(assemble_covariance(&params), Matrix::from_diagonal(&idio));

        let pop = precision_factor_rows(&params).unwrap();
        for j in 0..4 {
            assert!((pop.tau_sq[j] - idio[j]).abs() < 1e-15);
            assert!(pop.alpha_star[j].amax() == 0.0);
            assert!((pop.theta[(j, j)] - 1.0 / idio[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_factor_two_assets_by_hand() {
        // K < p - 1 is required by the constructor, so check the arithmetic
        // on the covariance formula directly.
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let sigma = a.transpose() * Matrix::identity(1, 1) * &a + Matrix::identity(2, 2);
        assert_eq!(sigma, Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn covariance_eigenvalues_above_noise_floor() {
        let params = random_params(3, 10, 5);
        let sigma = assemble_covariance(&params);
        let eig = linalg::sym_eigenvalues_desc(&sigma).unwrap();
        let floor = params.idio_var().min();
        assert!(eig[eig.len() - 1] >= floor - 1e-12);
    }

    #[test]
    fn direct_precision_examples() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 4.0]));
        let inv = precision_direct(&d).unwrap();
        assert!((inv - Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.25]))).amax() < 1e-15);
        let i = Matrix::identity(5, 5);
        assert!((precision_direct(&i).unwrap() - &i).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = Matrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let s = &b * b.transpose() + Matrix::identity(8, 8);
        let theta = precision_direct(&s).unwrap();
        assert!((theta * &s - Matrix::identity(8, 8)).amax() < 1e-9);
    }

    #[test]
    fn direct_precision_refuses_near_singular() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-13]));
        assert!(matches!(
            precision_direct(&d),
            Err(Error::SingularSigma { .. })
        ));
    }

    #[test]
    fn factor_rows_match_direct_inverse_single_factor() {
        let params = FactorModelParams::new(
            Matrix::from_row_slice(1, 3, &[0.8, 0.8, 0.8]),
            Matrix::from_row_slice(1, 1, &[2.0]),
            Vector::from_vec(vec![0.5]),
            Vector::from_vec(vec![1.0, 1.0, 1.0]),
        )
        .unwrap();
        let pop = precision_factor_rows(&params).unwrap();
        let direct = precision_direct(&assemble_covariance(&params)).unwrap();
        assert!((pop.theta - direct).amax() <= 1e-8);
    }

    #[test]
    fn factor_rows_reassemble_exactly() {
        let params = random_params(2, 7, 11);
        let pop = precision_factor_rows(&params).unwrap();
        for j in 0..7 {
            assert_eq!(pop.theta[(j, j)], 1.0 / pop.tau_sq[j]);
            for (idx, m) in (0..7).filter(|&m| m != j).enumerate() {
                assert_eq!(pop.theta[(j, m)], -pop.alpha_star[j][idx] / pop.tau_sq[j]);
            }
            assert!(pop.theta[(j, j)] > 0.0);
        }
    }

    #[test]
    fn population_theta_is_symmetric_inverse() {
        let params = random_params(4, 15, 12);
        let pop = precision_factor_rows(&params).unwrap();
        let sigma = assemble_covariance(&params);
        assert!((&pop.theta - pop.theta.transpose()).amax() <= 1e-8);
        assert!((&pop.theta * &sigma - Matrix::identity(15, 15)).amax() <= 1e-8);
    }

    #[test]
    fn alpha_star_matches_regression_identity() {
        let params = random_params(3, 9, 13);
        let sigma = assemble_covariance(&params);
        for j in 0..9 {
            let s_mm = linalg::drop_row_col(&sigma, j);
            let s_mj = linalg::drop_entry(&sigma.column(j).into_owned(), j);
            let oracle = Cholesky::new(s_mm).unwrap().solve(&s_mj);
            let alpha = alpha_star(&params, j).unwrap();
            assert!((alpha - oracle).amax() <= 1e-9);
        }
    }

    #[test]
    fn alpha_star_zero_loadings() {
        let params = FactorModelParams::new(
            Matrix::zeros(1, 3),
            Matrix::identity(1, 1),
            Vector::zeros(1),
            Vector::from_vec(vec![1.0, 2.0, 3.0]),
        )
        .unwrap();
        assert_eq!(alpha_star(&params, 1).unwrap().amax(), 0.0);
    }

    #[test]
    fn bivariate_regression_slope() {
        // with p = 2 the model constructor does not apply; check the identity
        // Σ₁₂/Σ₂₂ against the generic solve on a 2×2 covariance
        let sigma = Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.5]);
        let s_mm = linalg::drop_row_col(&sigma, 0);
        let s_mj = linalg::drop_entry(&sigma.column(0).into_owned(), 0);
        let slope = Cholesky::new(s_mm).unwrap().solve(&s_mj)[0];
        assert!((slope - 0.6 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn snr_with_isotropic_noise() {
        let k = 2;
        let p = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let loadings = Matrix::from_fn(k, p, |_, _| rng.random_range(-1.0..1.0));
        let factor_cov = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let c = 1.7;
        let params = FactorModelParams::new(
            loadings.clone(),
            factor_cov.clone(),
            Vector::zeros(k),
            Vector::from_element(p, c),
        )
        .unwrap();
        let diag = snr(&params).unwrap();
        for j in 0..p {
            let a_mj = linalg::drop_column(&loadings, j);
            let big = a_mj.transpose() * &factor_cov * &a_mj;
            let eig = linalg::sym_eigenvalues_desc(&big).unwrap();
            assert!((diag.xi[j] - eig[k - 1] / c).abs() <= 1e-9 * eig[k - 1]);
        }
        assert_eq!(diag.delta_n, c);
        assert_eq!(diag.r_n, c);
    }

    #[test]
    fn snr_scales_quadratically_and_is_rotation_invariant() {
        let params = random_params(3, 10, 22);
        let base = snr(&params).unwrap();
        let scaled = snr(&params.scale_loadings(2.0).unwrap()).unwrap();
        for (a, b) in base.xi.iter().zip(&scaled.xi) {
            assert!((b - 4.0 * a).abs() <= 1e-10 * b);
        }
        // A -> cA, Σ_f -> Σ_f / c²
        let c = 3.0;
        let moved = FactorModelParams::new(
            params.loadings() * c,
            params.factor_cov() / (c * c),
            params.factor_mean().clone(),
            params.idio_var().clone(),
        )
        .unwrap();
        let other = snr(&moved).unwrap();
        for (a, b) in base.xi.iter().zip(&other.xi) {
            assert!((a - b).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn snr_lambda_matches_full_eigenproblem() {
        let params = random_params(3, 10, 23);
        let diag = snr(&params).unwrap();
        let a = params.loadings();
        for j in 0..10 {
            let a_mj = linalg::drop_column(a, j);
            let big = a_mj.transpose() * params.factor_cov() * &a_mj;
            let lam_k = linalg::sym_eigenvalues_desc(&big).unwrap()[2];
            let noise = linalg::drop_entry(params.idio_var(), j).max();
            assert!((diag.xi[j] * noise - lam_k).abs() <= 1e-9 * lam_k.max(1.0));
        }
        assert!(diag.xi.iter().all(|&x| x >= diag.xi_bar));
        assert!(diag.delta_n <= diag.r_n);
    }

    #[test]
    fn loading_norms_grow_with_loadings() {
        let params = random_params(2, 8, 24);
        let base = snr(&params).unwrap();
        let mut bigger = params.loadings().clone();
        bigger[(0, 3)] += bigger[(0, 3)].signum() * 2.0;
        let moved = FactorModelParams::new(
            bigger,
            params.factor_cov().clone(),
            params.factor_mean().clone(),
            params.idio_var().clone(),
        )
        .unwrap();
        let after = snr(&moved).unwrap();
        assert!(after.d1n >= base.d1n - 1e-12);
        assert!(after.d2n >= base.d2n - 1e-12);
    }

    #[test]
    fn rank_deficient_loadings_rejected() {
        // second factor loads on one asset only, so removing it kills rank
        let mut loadings = Matrix::zeros(2, 5);
        for j in 0..5 {
            loadings[(0, j)] = 1.0;
        }
        loadings[(1, 2)] = 1.0;
        let params = FactorModelParams::new(
            loadings,
            Matrix::identity(2, 2),
            Vector::zeros(2),
            Vector::from_element(5, 1.0),
        )
        .unwrap();
        assert!(matches!(
            snr(&params),
            Err(Error::RankDeficientLoadings { row: 2, .. })
        ));
    }

    fn rate_oracle(k: f64, n: f64, xi: f64, delta: f64, r: f64, eta: f64, psi: f64) -> (f64, f64) {
        let t1 = ((n.ln() + r) / (n * eta)).sqrt();
        let t2 = (k / (xi * delta)).sqrt();
        let t3 = ((k / xi) * (psi / eta) * (1.0 / delta)).sqrt();
        let t4 = ((k / xi) * (1.0 / eta)).sqrt();
        let w1 = t1.max(t2).max(t3).max(t4);
        (w1, w1.max((k / xi).sqrt()))
    }

    #[test]
    fn rate_bounds_examples() {
        let r = rate_bounds(3, 400, 10.0, 2.0, 3.0, 2.0, 1.0).unwrap();
        let (w1, w2) = rate_oracle(3.0, 400.0, 10.0, 2.0, 3.0, 2.0, 1.0);
        assert!((r.r_w1 - w1).abs() < 1e-15 && (r.r_w2 - w2).abs() < 1e-15);

        // RRE-like simplification
        let r = rate_bounds(2, 100, 5.0, 1.0, 4.0, 1.0, 0.0).unwrap();
        let expected = ((100f64.ln() + 4.0) / 100.0).sqrt().max((2.0f64 / 5.0).sqrt());
        assert!((r.r_w1 - expected).abs() < 1e-15);
        assert_eq!(r.r_w1, r.r_w2);

        // δ_n → ∞
        let r = rate_bounds(3, 1_000_000, 2.0, 1e12, 1.0, 1e6, 1.0).unwrap();
        assert!((r.r_w2 - (1.5f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rate_bounds_rejects_bad_input() {
        assert!(rate_bounds(0, 10, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(rate_bounds(1, 10, 1.0, 1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn constructor_validation() {
        let ok = random_params(2, 6, 30);
        assert!(FactorModelParams::new(
            ok.loadings().clone(),
            -ok.factor_cov(),
            ok.factor_mean().clone(),
            ok.idio_var().clone()
        )
        .is_err());
        assert!(FactorModelParams::new(
            Matrix::zeros(3, 4),
            Matrix::identity(3, 3),
            Vector::zeros(3),
            Vector::from_element(4, 1.0)
        )
        .is_err());
        let mut idio = ok.idio_var().clone();
        idio[0] = 0.0;
        assert!(FactorModelParams::new(
            ok.loadings().clone(),
            ok.factor_cov().clone(),
            ok.factor_mean().clone(),
            idio
        )
        .is_err());
    }
}
