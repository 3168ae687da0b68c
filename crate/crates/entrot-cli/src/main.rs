//! Command line front end: load a JSON experiment config, run it, and map
//! the result onto the process exit status.
//!
//! Exit codes: 0 when every check passes, 1 on errors or when a hard
//! (unconditional) check fails, 2 when only finding-grade checks fail.
//! A `verify` run whose fresh report differs from the saved one also
//! exits 2. `--quiet` silences the status lines; errors still reach
//! stderr. The `ENTROT_THREADS` environment variable caps the library's
//! internal thread pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use entrot::report::{CheckGrade, RunReport};
use entrot::runner::{self, VerifyStatus};

#[derive(Parser)]
#[command(
    name = "entrot",
    version,
    about = "Entropy-regularized optimal transport runs with built-in inequality checks"
)]
struct Cli {
    /// JSON experiment config to execute.
    #[arg(long, value_name = "path")]
    config: PathBuf,

    /// Output directory; overrides the config's `output` field.
    #[arg(long, value_name = "dir")]
    out: Option<PathBuf>,

    /// Seed; overrides the config's `run.seed`.
    #[arg(long, value_name = "u64")]
    seed: Option<u64>,

    /// Print nothing on success; errors still go to stderr.
    #[arg(long)]
    quiet: bool,
}

fn print_status(report: &RunReport, out_dir: &std::path::Path, verify: VerifyStatus) {
    println!(
        "{}: {} checks, {} hard failures, {} findings (seed {})",
        report.command,
        report.checks.len(),
        report.hard_failures,
        report.findings,
        report.seed
    );
    for row in &report.checks {
        let status = if row.pass {
            "pass"
        } else {
            match row.grade {
                CheckGrade::Hard => "FAIL",
                CheckGrade::Finding => "finding",
            }
        };
        println!("  [{status}] {} — {}", row.name, row.anchor);
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    match verify {
        VerifyStatus::NotVerify => {}
        VerifyStatus::Fresh => println!("verify: no previous report.json; saved a fresh one"),
        VerifyStatus::Match => println!("verify: report.json reproduced byte for byte"),
        VerifyStatus::Mismatch => {}
    }
    println!(
        "wrote {} ({})",
        out_dir.display(),
        report.artifacts.join(", ")
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match runner::run(&cli.config, cli.out.as_deref(), cli.seed) {
        Ok(outcome) => {
            if !cli.quiet {
                print_status(&outcome.report, &outcome.out_dir, outcome.verify);
            }
            if outcome.verify == VerifyStatus::Mismatch {
                eprintln!(
                    "verify: fresh report.json differs from the one saved in {}",
                    outcome.out_dir.display()
                );
            }
            let code = outcome.exit_code();
            if code == 1 && !cli.quiet {
                eprintln!("{} hard check(s) failed", outcome.report.hard_failures);
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
