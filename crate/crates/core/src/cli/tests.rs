use std::fs;

use super::*;
use crate::backtest::{load_returns, synthetic_returns, write_returns};
use crate::estimators::EstimatorSpec;
use crate::simulation::{read_cells_csv, Dimensions};

fn parse(args: &[&str]) -> Result<Invocation> {
    let mut argv = vec!["latent-precision"];
    argv.extend_from_slice(args);
    parse_config(argv, None)
}

fn resolved(args: &[&str]) -> RunConfig {
    match parse(args).unwrap() {
        Invocation::Run(c) | Invocation::PrintConfig(c) => c,
        Invocation::Info(t) => panic!("unexpected info {t}"),
    }
}

fn main_args(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["latent-precision"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(argv, None, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn simulate_flags_give_the_table_design() {
    let c = resolved(&["simulate", "--k-true", "3", "--n", "100,200,400", "--gamma", "1.5", "--reps", "100", "--seed", "7"]);
    assert_eq!(c.command, Command::Simulate);
    assert_eq!(c.sim.k_true, 3);
    assert_eq!(c.sim.n_grid, [100, 200, 400]);
    assert_eq!(c.sim.dims, Dimensions::Ratio(1.5));
    assert_eq!(c.sim.designs(), [(100, 150), (200, 300), (400, 600)]);
    assert_eq!((c.sim.n_reps, c.sim.base_seed, c.seed), (100, 7, 7));
    let labels: Vec<String> = c.sim.methods.iter().map(|m| m.label()).collect();
    assert_eq!(labels, ["RRE", "PCR-3F", "PCR-20F", "PCR-Adaptive"]);
}

#[test]
fn no_arguments_is_a_usage_error_listing_commands() {
    let err = parse(&[]).unwrap_err();
    assert_eq!(err.class(), crate::error::ErrorClass::Usage);
    let text = err.to_string();
    for cmd in ["estimate", "simulate", "sweep", "backtest"] {
        assert!(text.contains(cmd), "{text}");
    }
    let (code, _, stderr) = main_args(&[]);
    assert_eq!(code, 2);
    let record: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["error"]["kind"], "UsageError");
    assert_eq!(record["error"]["exit_code"], 2);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "[sim]\nreps = 50\nk_true = 5\n").unwrap();
    let p = path.to_str().unwrap();
    let c = resolved(&["simulate", "--config", p, "--reps", "100"]);
    assert_eq!((c.sim.n_reps, c.sim.k_true), (100, 5));
    let c = resolved(&["simulate", "--config", p]);
    assert_eq!(c.sim.n_reps, 50);
}

#[test]
fn file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "[run]\nseed = 3\n\n[sim]\nrepz = 5\n").unwrap();
    let err = parse(&["simulate", "--config", path.to_str().unwrap()]).unwrap_err();
    match err.root() {
        Error::ConfigParse { line, message } => {
            assert_eq!(*line, 5);
            assert!(message.contains("repz"), "{message}");
        }
        e => panic!("unexpected {e}"),
    }
    fs::write(&path, "[run]\nseed = \"x\"\n").unwrap();
    assert!(matches!(
        parse(&["simulate", "--config", path.to_str().unwrap()]).unwrap_err().root(),
        Error::ConfigParse { line: 2, .. }
    ));
    fs::write(&path, "[extra]\n").unwrap();
    assert!(parse(&["simulate", "--config", path.to_str().unwrap()]).is_err());
}

#[test]
fn printed_config_reloads_to_the_same_run() {
    let c = resolved(&["sweep", "--print-config", "--reps", "3", "--alpha", "0.5,1", "--method", "pcr-4f", "--demean"]);
    let text = c.to_toml();
    let back = ConfigFile::parse(&text).unwrap();
    assert_eq!(RunConfig::resolve(Command::Sweep, &back, None).unwrap(), c);
    assert_eq!(c.estimator, EstimatorSpec { demean: true, ..EstimatorSpec::pcr_fixed(4) });
    assert_eq!(c.sim.designs(), [(400, 450)]);
    let (code, out, _) = main_args(&["sweep", "--print-config", "--reps", "3"]);
    assert_eq!(code, 0);
    assert!(out.contains("[sim]") && out.contains("reps = 3"));
}

#[test]
fn resolution_rules() {
    let c = resolved(&["estimate"]);
    assert_eq!(c.estimator, EstimatorSpec::pcr_adaptive());
    assert_eq!(c.output_dir, std::path::PathBuf::from(DEFAULT_OUTPUT));
    let env = parse_config(["x", "estimate"], Some("/tmp/elsewhere")).unwrap();
    let Invocation::Run(env) = env else { panic!() };
    assert_eq!(env.output_dir, std::path::PathBuf::from("/tmp/elsewhere"));
    let flag = parse_config(["x", "estimate", "-o", "mine"], Some("/tmp/elsewhere")).unwrap();
    let Invocation::Run(flag) = flag else { panic!() };
    assert_eq!(flag.output_dir, std::path::PathBuf::from("mine"));
    assert_eq!(resolved(&["estimate", "--k", "2"]).estimator, EstimatorSpec::pcr_fixed(2));
    assert!(resolved(&["backtest"]).estimator.demean);
    assert!(!resolved(&["backtest", "--demean", "false"]).estimator.demean);
    assert!(parse(&["estimate", "--method", "rre", "--k", "2"]).is_err());
    assert!(parse(&["estimate", "--method", "lasso"]).is_err());
    assert!(parse(&["simulate", "--gamma", "1", "--p", "5"]).is_err());
    assert!(parse(&["backtest", "--cost-bps", "-1"]).is_err());
    assert!(parse(&["backtest", "--portfolio", "x"]).is_err());
    assert!(parse(&["simulate", "--kappa", "0.5"]).is_err());
    assert!(parse(&["simulate", "--reps", "0"]).is_err());
    let (code, out, _) = main_args(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("backtest"));
}

#[test]
fn estimate_writes_matrix_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.csv");
    write_returns(&input, &synthetic_returns(2, 120, 10, 3, 0.01).unwrap()).unwrap();
    let out = dir.path().join("est");
    let (code, stdout, stderr) = main_args(&[
        "estimate", "--input", input.to_str().unwrap(), "--method", "pcr-adaptive", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 4);
    let theta = load_returns_like(&out.join("theta.csv"));
    assert_eq!((theta.len(), theta[0].len()), (10, 10));
    let rows = fs::read_to_string(out.join("rows.csv")).unwrap();
    assert!(rows.starts_with("asset,tau_sq,k_used,r_hat,eta_hat,psi_hat,interpolating\n"));
    assert_eq!(rows.lines().count(), 11);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["p"], 10);
}

fn load_returns_like(path: &std::path::Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_counts_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let (code, _, stderr) = main_args(&[
        "simulate", "--reps", "2", "--n", "50", "--gamma", "0.5", "--k-true", "2", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let cells = read_cells_csv(&out.join("cells.csv")).unwrap();
    assert_eq!(cells.len(), 2 * 4);
    for m in ["RRE", "PCR-3F", "PCR-20F", "PCR-Adaptive"] {
        assert_eq!(cells.iter().filter(|c| c.method == m).count(), 2);
    }
    assert!(out.join("summary.json").exists());
}

#[test]
fn backtest_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bt");
    let (code, _, stderr) = main_args(&[
        "backtest", "--method", "pcr-3f", "--n-in", "240", "--panel-n", "348", "--panel-p", "10", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(v["summary"]["sharpe_gross"].is_number() && v["summary"]["sharpe_net"].is_number());
    assert_eq!(v["per_window"].as_array().unwrap().len(), 108);
    assert_eq!(fs::read_to_string(out.join("windows.csv")).unwrap().lines().count(), 109);
    let panel = load_returns(&out.join("panel.csv")).unwrap();
    assert_eq!((panel.n(), panel.p()), (348, 10));
}

#[test]
fn failures_remove_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail");
    // the synthetic panel is written, then the estimator rejects k
    let (code, _, stderr) = main_args(&["estimate", "--k", "50", "--panel-p", "10", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{stderr}");
    let record: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["error"]["kind"], "KTooLarge");
    assert!(!out.exists());

    let kept = dir.path().join("kept");
    fs::create_dir(&kept).unwrap();
    fs::write(kept.join("mine.txt"), "x").unwrap();
    let missing = dir.path().join("nope.csv");
    let (code, _, _) = main_args(&["estimate", "--input", missing.to_str().unwrap(), "-o", kept.to_str().unwrap()]);
    assert_eq!(code, 3);
    let left: Vec<_> = fs::read_dir(&kept).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, ["mine.txt"]);

    let input = dir.path().join("r.csv");
    write_returns(&input, &synthetic_returns(2, 60, 5, 3, 0.01).unwrap()).unwrap();
    let (code, _, _) = main_args(&["estimate", "--input", input.to_str().unwrap(), "--method", "pcr-elbow", "-o", kept.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn same_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run_into = |name: &str| {
        let out = dir.path().join(name);
        let (code, _, e) = main_args(&["sweep", "--reps", "2", "--n", "30", "--p", "25", "--k-true", "2", "--alpha", "0.5,1", "--methods", "rre,pcr-2f", "-o", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{e}");
        fs::read(out.join("sweep.csv")).unwrap()
    };
    let a = run_into("a");
    assert_eq!(a, run_into("b"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 2);
}
