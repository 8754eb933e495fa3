//! The four command-line subcommands driven in-process on small settings,
//! writing into a temporary directory.
//!
//! `cargo run --release --example cli_pipeline`

use latent_precision::cli::main_with;

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let base = dir.path().display().to_string();
    let runs: [(&str, Vec<&str>); 4] = [
        ("estimate", vec!["--method", "pcr-adaptive", "--panel-n", "120", "--panel-p", "40"]),
        ("simulate", vec!["--n", "100", "--reps", "2", "--methods", "rre,pcr-3f"]),
        ("sweep", vec!["--k-true", "5", "--n", "100", "--p", "120", "--reps", "2", "--alpha", "0.5,1.0"]),
        ("backtest", vec!["--panel-p", "20", "--portfolio", "gmv"]),
    ];
    for (cmd, flags) in runs {
        let out = format!("{base}/{cmd}");
        let mut argv = vec!["latent-precision", cmd, "-o", &out];
        argv.extend(flags);
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        let code = main_with(&argv, None, &mut stdout, &mut stderr);
        print!("$ {}\n{}", argv.join(" "), String::from_utf8_lossy(&stdout));
        eprint!("{}", String::from_utf8_lossy(&stderr));
        println!("exit {code}");
        let mut files: Vec<String> = std::fs::read_dir(&out)
            .map(|d| d.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect())
            .unwrap_or_default();
        files.sort();
        println!("  wrote {files:?}\n");
    }
}
