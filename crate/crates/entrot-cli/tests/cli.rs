//! End-to-end tests of the `entrot` binary: flags, exit codes, artifact
//! determinism, and the verify workflow, all through real process spawns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entrot"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn entrot")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const GAUSSIAN_CFG: &str = r#"{
    "command": "gaussian",
    "gaussian": {"sigma": 1.0, "lambda": 0.1, "t_max": 200},
    "run": {"seed": 7}
}"#;

#[test]
fn zero_cost_solve_writes_a_single_row_trace_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "zero.csv", "0,0\n0,0\n");
    write(
        dir.path(),
        "cfg.json",
        r#"{
            "command": "solve",
            "problem": {
                "mu": {"inline": {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}},
                "nu": {"inline": {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}},
                "cost": {"csv": {"path": "zero.csv"}},
                "lambda": 0.5
            },
            "run": {"max_iters": 50, "tol": 1e-12, "seed": 1}
        }"#,
    );
    let out = run(&["--config", "cfg.json", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 2, "header plus exactly one data row");
    assert!(lines[0].starts_with("t,lambda,E,delta"));
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "0");
    assert_eq!(fields[3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn identical_configs_and_seeds_reproduce_artifacts_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let a = run(&["--config", "cfg.json", "--out", "a"], dir.path());
    let b = run(&["--config", "cfg.json", "--out", "b"], dir.path());
    assert_eq!(a.status.code(), Some(0), "stderr: {}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    for name in ["report.json", "summary.md", "trace.csv", "plot.csv"] {
        let x = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn status_lines_carry_check_names_and_anchors() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let out = run(&["--config", "cfg.json", "--out", "out"], dir.path());
    let text = stdout(&out);
    assert!(text.contains("gaussian: 3 checks"));
    assert!(text.contains("Thm lower-bound-speed-gaussian"));
    assert!(text.contains("[pass]"));
    assert!(text.contains("wrote"));
}

#[test]
fn quiet_suppresses_stdout_but_keeps_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let out = run(
        &["--config", "cfg.json", "--out", "out", "--quiet"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let out = run(
        &["--config", "cfg.json", "--out", "out", "--seed", "42", "--quiet"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["seed"], 42);
}

#[test]
fn missing_config_exits_one_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--config", "nope.json", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.json"));
}

#[test]
fn malformed_config_exits_one_with_file_and_line_context() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", "{\n  \"command\": \"solve\",\n  oops\n}");
    let out = run(&["--config", "bad.json", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.json:3"), "got: {err}");
}

#[test]
fn config_without_output_and_no_out_flag_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let out = run(&["--config", "cfg.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--out"));
}

#[test]
fn verify_matches_then_flags_a_mismatch_after_a_seed_change() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let verify_cfg = GAUSSIAN_CFG.replacen("\"gaussian\",", "\"verify\",", 1);
    write(dir.path(), "verify.json", &verify_cfg);

    let first = run(&["--config", "cfg.json", "--out", "out"], dir.path());
    assert_eq!(first.status.code(), Some(0));

    let ok = run(&["--config", "verify.json", "--out", "out"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("byte for byte"));

    let bad = run(
        &["--config", "verify.json", "--out", "out", "--seed", "8"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("differs"));
}

#[test]
fn findings_alone_exit_two_while_stdout_says_finding() {
    // A short horizon never reaches the ratio-measurement window, which is
    // reported as a finding, not a defect.
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{
            "command": "gaussian",
            "gaussian": {"sigma": 1.0, "lambda": 0.1, "t_max": 40},
            "run": {"seed": 7}
        }"#,
    );
    let out = run(&["--config", "cfg.json", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("[finding]"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["hard_failures"], 0);
    assert_eq!(report["findings"], 1);
}

#[test]
fn thread_cap_environment_variable_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.json", GAUSSIAN_CFG);
    let a = run(&["--config", "cfg.json", "--out", "a", "--quiet"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    let b = bin()
        .args(["--config", "cfg.json", "--out", "b", "--quiet"])
        .current_dir(dir.path())
        .env("ENTROT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0));
    for name in ["report.json", "trace.csv", "plot.csv"] {
        let x = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs under a thread cap");
    }
}

#[test]
fn output_directory_from_the_config_is_resolved_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("configs");
    std::fs::create_dir(&sub).unwrap();
    let with_output = GAUSSIAN_CFG.replacen(
        "\"run\":",
        "\"output\": \"results\", \"run\":",
        1,
    );
    write(&sub, "cfg.json", &with_output);
    let out = run(&["--config", "configs/cfg.json", "--quiet"], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(sub.join("results/report.json").is_file());
}
