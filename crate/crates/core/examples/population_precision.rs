//! Population precision of a drawn factor model: row-wise construction
//! against direct inversion, signal-to-noise diagnostics and the rate bounds
//! implied by a sample estimate.
//!
//! `cargo run --release --example population_precision -- [p] [seed]`

use latent_precision::estimators::{estimate_precision, EstimatorSpec};
use latent_precision::factor_model::{
    alpha_star, assemble_covariance, precision_direct, precision_factor_rows, rate_bounds, snr,
};
use latent_precision::linalg::max_abs_diff;
use latent_precision::simulation::{gen_params, sample_panel};

fn main() -> latent_precision::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let k = 3;
    let params = gen_params(k, p, seed)?;

    let rows = precision_factor_rows(&params)?;
    let direct = precision_direct(&assemble_covariance(&params))?;
    println!("p = {p}, K = {k}");
    println!("row-wise vs direct precision: max |diff| = {:.2e}", max_abs_diff(&rows.theta, &direct));
    let a0 = alpha_star(&params, 0)?;
    println!("alpha*_0 leading entries {:?}", a0.iter().take(4).map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("tau*^2 range [{:.3}, {:.3}]", rows.tau_sq.min(), rows.tau_sq.max());

    let d = snr(&params)?;
    println!(
        "xi_bar {:.3}, delta_n {:.3}, r_n {:.3}, d1n {:.3}, d2n {:.3}",
        d.xi_bar, d.delta_n, d.r_n, d.d1n, d.d2n
    );

    let n = 2 * p;
    let y = sample_panel(&params, n, seed);
    let est = estimate_precision(&y, &EstimatorSpec::pcr_fixed(k), None)?;
    let bounds = rate_bounds(
        k,
        n,
        d.xi_bar,
        d.delta_n,
        est.r_bar() as f64,
        est.eta_bar(),
        est.psi_bar(),
    )?;
    println!(
        "PCR-{k}F on n = {n}: r_bar {}, eta_bar {:.3}, psi_bar {:.3}; rate terms w1 {:.4}, w2 {:.4}",
        est.r_bar(),
        est.eta_bar(),
        est.psi_bar(),
        bounds.r_w1,
        bounds.r_w2
    );
    println!("estimation error max |diff| = {:.4}", max_abs_diff(&est.theta, &direct));
    Ok(())
}
