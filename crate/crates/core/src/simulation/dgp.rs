//! Data-generating process of the simulation study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::factor_model::FactorModelParams;
use crate::linalg::{self, Matrix, Vector};

const PARAM_STREAM: u64 = 1;
const PANEL_STREAM: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sample size `n`: `base ⊕ hash(n, rep)`.
pub fn rep_seed(base: u64, n: usize, rep: usize) -> u64 {
    base ^ splitmix64(splitmix64(n as u64) ^ rep as u64)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Factor covariance with diagonal evenly spaced on `[2.5, 3]` and
/// off-diagonals `(−1)^{i+j} 0.3^{|i−j|} min(Σ_ii, Σ_jj)`.
fn factor_cov(k: usize) -> Matrix {
    let diag: Vec<f64> = if k == 1 {
        vec![2.5]
    } else {
        (0..k).map(|i| 2.5 + 0.5 * i as f64 / (k - 1) as f64).collect()
    };
    Matrix::from_fn(k, k, |i, j| {
        if i == j {
            diag[i]
        } else {
            let d = i.abs_diff(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * 0.3f64.powi(d as i32) * diag[i].min(diag[j])
        }
    })
}

/// Draws model parameters: factor covariance as in [`factor_cov`], factor
/// means 0.5, loadings iid `N(0.5, sd = 1/√K)`, error variances iid
/// `Unif(1, 3) · ln p`.
pub fn gen_params(k: usize, p: usize, seed: u64) -> Result<FactorModelParams> {
    if k == 0 || p < k + 2 {
        return Err(Error::InvalidParams(format!(
            "need K >= 1 and p >= K + 2, got K = {k}, p = {p}"
        )));
    }
    let mut r = rng(seed, PARAM_STREAM);
    let cov = factor_cov(k);
    let sd = 1.0 / (k as f64).sqrt();
    let normal = Normal::new(0.5, sd).expect("positive standard deviation");
    let loadings = Matrix::from_fn(k, p, |_, _| normal.sample(&mut r));
    let log_p = (p as f64).ln();
    let idio = Vector::from_fn(p, |_, _| r.random_range(1.0..3.0) * log_p);
    FactorModelParams::new(loadings, cov, Vector::from_element(k, 0.5), idio)
}

/// `n` iid draws of `y_t = Aᵀ f_t + u_t` with Gaussian factors and errors,
/// as rows of an `n × p` matrix.
pub fn sample_panel(params: &FactorModelParams, n: usize, seed: u64) -> Matrix {
    let mut r = rng(seed, PANEL_STREAM);
    let k = params.n_factors();
    let p = params.n_assets();
    let root = linalg::sqrt_spd(params.factor_cov()).expect("validated SPD factor covariance");
    let z = Matrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut r));
    let mut f = z * root;
    for mut row in f.row_iter_mut() {
        row += params.factor_mean().transpose();
    }
    let sd: Vec<f64> = params.idio_var().iter().map(|v| v.sqrt()).collect();
    let u = Matrix::from_fn(n, p, |_, j| {
        let e: f64 = StandardNormal.sample(&mut r);
        e * sd[j]
    });
    f * params.loadings() + u
}

/// Panel from freshly drawn parameters, multiplied by `scale` (for example
/// `0.01` to read the draws as percent returns in decimal units).
pub fn synthetic_panel(
    k: usize,
    n: usize,
    p: usize,
    seed: u64,
    scale: f64,
) -> Result<(FactorModelParams, Matrix)> {
    let params = gen_params(k, p, seed)?;
    let y = sample_panel(&params, n, seed) * scale;
    Ok((params, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_covariance_layout() {
        let c = factor_cov(3);
        assert_eq!((c[(0, 0)], c[(1, 1)], c[(2, 2)]), (2.5, 2.75, 3.0));
        assert!((c[(0, 1)] + 0.75).abs() < 1e-15);
        assert!((c[(0, 2)] - 0.09 * 2.5).abs() < 1e-15);
        let c2 = factor_cov(2);
        assert_eq!((c2[(0, 0)], c2[(1, 1)]), (2.5, 3.0));
        assert!((c2[(0, 1)] + 0.75).abs() < 1e-15);
        assert_eq!(factor_cov(1)[(0, 0)], 2.5);
        assert!(nalgebra::Cholesky::new(factor_cov(20)).is_some());
    }

    #[test]
    fn error_variances_are_in_range() {
        let params = gen_params(3, 100, 5).unwrap();
        let (lo, hi) = (100f64.ln(), 3.0 * 100f64.ln());
        assert!(params.idio_var().iter().all(|&v| v >= lo && v <= hi));
        assert!((lo - 4.605).abs() < 1e-3 && (hi - 13.816).abs() < 1e-3);
        // independent sampler on the same stream reproduces the draws
        let mut r = rng(5, PARAM_STREAM);
        let normal = Normal::new(0.5, 1.0 / 3f64.sqrt()).unwrap();
        for _ in 0..300 {
            let _: f64 = normal.sample(&mut r);
        }
        let first = r.random_range(1.0..3.0) * 100f64.ln();
        assert_eq!(first, params.idio_var()[0]);
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        assert_eq!(rep_seed(7, 400, 3), rep_seed(7, 400, 3));
        assert_ne!(rep_seed(7, 400, 3), rep_seed(7, 400, 4));
        assert_ne!(rep_seed(7, 400, 3), rep_seed(7, 200, 3));
        assert_ne!(rep_seed(7, 400, 3), rep_seed(8, 400, 3));
        let p = gen_params(2, 10, 1).unwrap();
        assert_eq!(sample_panel(&p, 5, 9), sample_panel(&p, 5, 9));
    }

    #[test]
    fn rejects_too_few_assets() {
        assert!(gen_params(3, 4, 1).is_err());
        assert!(gen_params(0, 10, 1).is_err());
    }
}
