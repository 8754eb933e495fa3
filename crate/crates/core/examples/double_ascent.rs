//! Net Sharpe ratio of the ridgeless maximum-Sharpe portfolio as the number
//! of assets crosses the window length (n_I = 240).
//!
//! `cargo run --release --example double_ascent -- [trials]`

use latent_precision::backtest::{rolling_backtest, synthetic_returns, Portfolio, DEFAULT_COST};
use latent_precision::estimators::EstimatorSpec;

fn main() -> latent_precision::Result<()> {
    let trials: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let sizes = [10, 200, 300];
    // in-window demeaning: without it the interpolating fit gives Θ̂μ̂ = 0
    let spec = EstimatorSpec {
        demean: true,
        ..EstimatorSpec::rre()
    };
    let mut dips = 0;
    for seed in 0..trials {
        let mut sharpe = Vec::new();
        let mut restarts = Vec::new();
        for &p in &sizes {
            let panel = synthetic_returns(3, 348, p, seed, 0.01)?;
            let rep = rolling_backtest(&panel, 240, &spec, Portfolio::Msr, DEFAULT_COST)?;
            restarts.push(rep.summary.restarts);
            sharpe.push(rep.summary.sharpe_net);
        }
        let dip = sharpe[1] < sharpe[0] && sharpe[1] < sharpe[2];
        dips += dip as usize;
        println!(
            "seed {seed:>3}: {:>9.4} {:>9.4} {:>9.4}  restarts {:?} {}",
            sharpe[0],
            sharpe[1],
            sharpe[2],
            restarts,
            if dip { "dip" } else { "" }
        );
    }
    println!("minimum at p = 200 in {dips} of {trials} trials");
    Ok(())
}
