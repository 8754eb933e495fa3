//! Error against loading strength at K = 20, n = 400, p = 450.
//!
//! `cargo run --release --example snr_sweep -- [reps]`

use std::time::Instant;

use latent_precision::simulation::{snr_sweep, SimConfig};

fn main() -> latent_precision::Result<()> {
    let mut cfg = SimConfig::sweep_design();
    cfg.n_reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let start = Instant::now();
    let points = snr_sweep(&cfg)?;
    println!("{:>6} {:>10} {:<8} {:>12} {:>12}", "alpha", "xi_bar", "method", "mean_abs", "max_row_l2");
    for pt in &points {
        println!(
            "{:>6.2} {:>10.3} {:<8} {:>12.5} {:>12.5}",
            pt.alpha, pt.xi_bar, pt.method, pt.mean_abs_error.mean, pt.max_row_l2_error.mean
        );
    }
    eprintln!("{} points in {:.1?}", points.len(), start.elapsed());
    Ok(())
}
