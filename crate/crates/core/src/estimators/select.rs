//! Factor-count selection: the feasible singular-value threshold rule and the
//! oracle elbow rule.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Threshold constant `μ_n = mu_scale · (n + p − 1)`.
pub fn mu_n(n: usize, p_minus: usize, mu_scale: f64) -> f64 {
    mu_scale * (n + p_minus) as f64
}

/// Largest candidate count
/// `K̄ = floor(κ/(1+κ) · n(p−1)/μ_n) ∧ n ∧ (p − 1 + 1)`.
pub fn feasible_k_bar(n: usize, p_minus: usize, kappa: f64, mu_n: f64) -> usize {
    let raw = (kappa / (1.0 + kappa)) * (n * p_minus) as f64 / mu_n;
    let raw = if raw.is_finite() && raw > 0.0 {
        raw.floor() as usize
    } else {
        0
    };
    raw.min(n).min(p_minus + 1)
}

/// Counting rule on a descending list of squared singular values of `Y_{-j}`.
///
/// `frob_sq` is `‖Y_{-j}‖_F²`. Candidates run over `k = 1..=K̄`, capped by
/// the number of singular values supplied; the sum stops at the first `k`
/// whose variance denominator `n(p−1) − μ_n k` is not positive.
pub fn feasible_count(
    sq_values: &[f64],
    frob_sq: f64,
    n: usize,
    p_minus: usize,
    kappa: f64,
    mu_scale: f64,
) -> usize {
    let mu = mu_n(n, p_minus, mu_scale);
    let k_bar = feasible_k_bar(n, p_minus, kappa, mu).min(sq_values.len());
    let total = (n * p_minus) as f64;
    let mut explained = 0.0;
    let mut count = 0;
    for (k, &s2) in sq_values.iter().take(k_bar).enumerate() {
        let k = k + 1;
        let denom = total - mu * k as f64;
        if denom <= 0.0 {
            break;
        }
        explained += s2;
        let v2 = (frob_sq - explained).max(0.0) / denom;
        if s2 >= mu * v2 {
            count += 1;
        }
    }
    count
}

/// Feasible factor count for one row from `Y_{-j}` (`n × (p−1)`).
pub fn select_k_feasible(y_minus: &Matrix, kappa: f64, mu_scale: f64) -> Result<usize> {
    check_constant("kappa", kappa)?;
    if !(mu_scale > 0.0 && mu_scale.is_finite()) {
        return Err(Error::InvalidParams(format!("mu_scale must be positive, got {mu_scale}")));
    }
    linalg::check_finite(y_minus)?;
    let (n, pm) = y_minus.shape();
    let dec = linalg::svd(y_minus)?;
    let sq: Vec<f64> = dec.s.iter().map(|s| s * s).collect();
    Ok(feasible_count(&sq, y_minus.norm_squared(), n, pm, kappa, mu_scale))
}

/// Oracle noise level `Δ = c_Δ (‖Σ_{U,−j}‖₂ + tr(Σ_{U,−j}) / n)` for a
/// diagonal error covariance given by its diagonal.
pub fn elbow_delta(sigma_u_minus: &[f64], n: usize, c_delta: f64) -> f64 {
    let max = sigma_u_minus.iter().copied().fold(0.0, f64::max);
    let trace: f64 = sigma_u_minus.iter().sum();
    c_delta * (max + trace / n as f64)
}

/// `max{k : λ̂_k ≥ threshold}` over descending eigenvalues `λ̂_k = σ_k²/n`.
pub fn elbow_count(eigenvalues: &[f64], threshold: f64) -> usize {
    eigenvalues.iter().take_while(|&&l| l >= threshold).count()
}

/// Oracle elbow count for one row. Requires the true error variances of
/// the other `p − 1` assets.
pub fn select_k_elbow(y_minus: &Matrix, sigma_u_minus: &Vector, c0: f64, c_delta: f64) -> Result<usize> {
    check_constant("c0", c0)?;
    check_constant("c_delta", c_delta)?;
    linalg::check_finite(y_minus)?;
    linalg::check_finite_vec(sigma_u_minus)?;
    let (n, pm) = y_minus.shape();
    if sigma_u_minus.len() != pm {
        return Err(Error::ShapeMismatch {
            expected: format!("{pm} error variances"),
            found: format!("{}", sigma_u_minus.len()),
        });
    }
    let dec = linalg::svd(y_minus)?;
    let eig: Vec<f64> = dec.s.iter().map(|s| s * s / n as f64).collect();
    let delta = elbow_delta(sigma_u_minus.as_slice(), n, c_delta);
    Ok(elbow_count(&eig, c0 * delta))
}

fn check_constant(name: &str, value: f64) -> Result<()> {
    if value > 1.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must exceed 1, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn k_bar_arithmetic() {
        // n = 4, p - 1 = 4, kappa = 2 with the literal quarter scale
        let mu = mu_n(4, 4, 0.25);
        assert_eq!(mu, 2.0);
        assert_eq!(feasible_k_bar(4, 4, 2.0, mu), 4);
    }

    #[test]
    fn elbow_threshold_count() {
        assert_eq!(elbow_count(&[10.0, 5.0, 0.1], 1.0), 2);
        assert_eq!(elbow_count(&[10.0, 5.0, 0.1], 11.0), 0);
        assert_eq!(elbow_count(&[], 1.0), 0);
    }

    #[test]
    fn elbow_delta_formula() {
        let d = elbow_delta(&[1.0, 3.0, 2.0], 4, 2.0);
        assert!((d - 2.0 * (3.0 + 6.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn strong_single_factor_is_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, p) = (200, 80);
        let f: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = Matrix::from_fn(n, p, |i, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            2.0 * f[i] + e
        });
        assert_eq!(select_k_feasible(&y, 2.0, 4.0).unwrap(), 1);
        let sigma = Vector::from_element(p, 1.0);
        assert_eq!(select_k_elbow(&y, &sigma, 2.0, 2.0).unwrap(), 1);
    }

    #[test]
    fn noise_selects_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = Matrix::from_fn(200, 100, |_, _| StandardNormal.sample(&mut rng));
        assert_eq!(select_k_feasible(&y, 2.0, 4.0).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_constants() {
        let y = Matrix::identity(4, 3);
        assert!(select_k_feasible(&y, 1.0, 4.0).is_err());
        assert!(select_k_feasible(&y, 2.0, 0.0).is_err());
        assert!(select_k_elbow(&y, &Vector::from_element(3, 1.0), 0.5, 2.0).is_err());
        assert!(select_k_elbow(&y, &Vector::from_element(2, 1.0), 2.0, 2.0).is_err());
    }

    #[test]
    fn k_bar_keeps_denominators_positive() {
        for n in [3, 10, 57, 400] {
            for pm in [2, 9, 100, 599] {
                for kappa in [1.01, 2.0, 50.0] {
                    for scale in [0.25, 1.0, 4.0] {
                        let mu = mu_n(n, pm, scale);
                        let k_bar = feasible_k_bar(n, pm, kappa, mu);
                        assert!((n * pm) as f64 - mu * k_bar as f64 > 0.0);
                    }
                }
            }
        }
    }
}
