//! End-to-end config-driven run: write a JSON experiment config, execute it
//! through the same runner the command line uses, and inspect the artifacts
//! it leaves behind (trace CSV, machine-readable report, markdown summary).
//!
//! Run with `cargo run --example config_run`.

use entrot::runner;

fn main() -> entrot::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let config_path = dir.path().join("experiment.json");
    std::fs::write(
        &config_path,
        r#"{
            "command": "solve",
            "problem": {
                "mu": {"grid": {"lo": [-1.0], "hi": [1.0], "n": 21,
                                "density": {"kind": "gaussian", "mean": [0.0], "sigma": 1.0}}},
                "nu": {"grid": {"lo": [-1.0], "hi": [1.0], "n": 17,
                                "density": {"kind": "uniform"}}},
                "cost": {"kind": "linear"},
                "lambda": 0.5
            },
            "run": {"max_iters": 500, "tol": 1e-12, "seed": 3},
            "output": "out"
        }"#,
    )
    .expect("write config");

    let outcome = runner::run(&config_path, None, None)?;
    println!("exit code: {}", outcome.exit_code());
    println!("artifacts in {}:", outcome.out_dir.display());
    let mut names: Vec<String> = std::fs::read_dir(&outcome.out_dir)
        .expect("list output")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in &names {
        println!("  {name}");
    }

    println!("\nchecks:");
    for row in &outcome.report.checks {
        println!(
            "  [{}] {} — {}",
            if row.pass { "pass" } else { "fail" },
            row.name,
            row.anchor
        );
    }

    let summary =
        std::fs::read_to_string(outcome.out_dir.join("summary.md")).expect("read summary");
    println!("\n--- summary.md ---\n{summary}");
    Ok(())
}
