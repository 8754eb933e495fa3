//! Small Monte-Carlo run of the high-dimensional design with K = 3.
//!
//! `cargo run --release --example monte_carlo -- [reps] [n...]`

use std::time::Instant;

use latent_precision::simulation::{run_mc, SimConfig};

fn main() -> latent_precision::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = SimConfig::table_design();
    cfg.n_reps = args.first().and_then(|s| s.parse().ok()).unwrap_or(5);
    let ns: Vec<usize> = args.iter().skip(1).filter_map(|s| s.parse().ok()).collect();
    if !ns.is_empty() {
        cfg.n_grid = ns;
    }
    let start = Instant::now();
    let res = run_mc(&cfg)?;
    println!("{:<14} {:>5} {:>5} {:>12} {:>12} {:>8}", "method", "n", "p", "mean_abs", "max_row_l2", "k=K");
    for s in &res.summaries {
        println!(
            "{:<14} {:>5} {:>5} {:>12.5} {:>12.5} {:>8.3}",
            s.method, s.n, s.p, s.mean_abs_error.mean, s.max_row_l2_error.mean, s.share_k_true
        );
    }
    eprintln!("{} cells in {:.1?}", res.cells.len(), start.elapsed());
    Ok(())
}
