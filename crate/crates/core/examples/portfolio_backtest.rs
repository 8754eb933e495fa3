//! Rolling-window backtest of several weight rules on one synthetic panel.
//!
//! `cargo run --release --example portfolio_backtest -- [p] [seed]`

use latent_precision::backtest::{
    run_backtest, synthetic_returns, EqualWeight, EstimatorRule, Portfolio, WeightRule, DEFAULT_COST,
};
use latent_precision::estimators::EstimatorSpec;

fn main() -> latent_precision::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let panel = synthetic_returns(3, 348, p, seed, 0.01)?;
    let demeaned = |spec: EstimatorSpec| EstimatorSpec { demean: true, ..spec };

    let rules: Vec<Box<dyn WeightRule>> = vec![
        Box::new(EqualWeight),
        Box::new(EstimatorRule { spec: demeaned(EstimatorSpec::rre()), portfolio: Portfolio::Msr }),
        Box::new(EstimatorRule { spec: demeaned(EstimatorSpec::pcr_adaptive()), portfolio: Portfolio::Msr }),
        Box::new(EstimatorRule { spec: demeaned(EstimatorSpec::rre()), portfolio: Portfolio::Gmv }),
        Box::new(EstimatorRule { spec: demeaned(EstimatorSpec::pcr_fixed(3)), portfolio: Portfolio::Gmv }),
    ];
    println!("{} months, {} assets, n_I = 240, cost {DEFAULT_COST}", panel.n(), panel.p());
    println!("{:<22} {:>9} {:>9} {:>9} {:>9} {:>8}", "rule", "mean_net", "sd_net", "SR_net", "turnover", "restarts");
    for rule in &rules {
        let r = run_backtest(&panel, 240, rule.as_ref(), DEFAULT_COST)?;
        let s = r.summary;
        println!(
            "{:<22} {:>9.5} {:>9.5} {:>9.4} {:>9.3} {:>8}",
            r.rule, s.mean_net, s.sd_net, s.sharpe_net, s.avg_turnover, s.restarts
        );
    }
    Ok(())
}
