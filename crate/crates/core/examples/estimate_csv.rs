//! Estimates a precision matrix from a returns CSV. Without an argument a
//! synthetic 120 x 80 panel is written to a temporary file first.
//!
//! `cargo run --release --example estimate_csv -- [returns.csv]`

use std::collections::BTreeMap;
use std::path::PathBuf;

use latent_precision::backtest::{load_returns, synthetic_returns, write_returns};
use latent_precision::estimators::{estimate_precision, EstimatorSpec};
use latent_precision::output::write_matrix_csv;

fn main() -> latent_precision::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let path = dir.path().join("returns.csv");
            write_returns(&path, &synthetic_returns(3, 120, 80, 11, 0.01)?)?;
            path
        }
    };
    let panel = load_returns(&path)?;
    println!("{}: {} months x {} assets", path.display(), panel.n(), panel.p());

    for spec in [EstimatorSpec::rre(), EstimatorSpec::pcr_adaptive(), EstimatorSpec::pcr_fixed(3)] {
        let est = estimate_precision(panel.values(), &spec, None)?;
        let mut counts = BTreeMap::new();
        for k in est.k_used() {
            *counts.entry(k).or_insert(0usize) += 1;
        }
        println!(
            "{:<13} interpolating {:<5} r_bar {:>3} eta_bar {:>10.3e} psi_bar {:>10.3e} k used {:?}",
            spec.label(),
            est.interpolating,
            est.r_bar(),
            est.eta_bar(),
            est.psi_bar(),
            counts
        );
        let out = dir.path().join(format!("theta_{}.csv", spec.label()));
        write_matrix_csv(&out, &est.theta, Some(panel.assets()))?;
    }
    Ok(())
}
