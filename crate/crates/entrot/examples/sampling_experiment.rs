//! Replication experiment on the sampled first marginal: draw N points,
//! form the induced mixture over the second support at a fixed potential,
//! and compare the variance of a test function under that empirical mixture
//! with its population value. The mean absolute gap shrinks at the 1/sqrt(N)
//! rate of its analytic bound, and the replication-to-replication spread
//! obeys an exponential tail bound.
//!
//! Run with `cargo run --example sampling_experiment`.

use entrot::stats::{self, ReplicationPlan};
use entrot::synthetic;

fn main() -> entrot::Result<()> {
    let prob = synthetic::random_problem(41, 40, 30, 0.8, 1.0);
    let psi = prob.solve_reference()?.psi;
    let f = synthetic::random_values(42, 30, -1.5, 1.5);
    let replications = 1000;

    println!(
        "{:>6} {:>14} {:>14} {:>8}",
        "N", "mean |gap|", "bound", "pass"
    );
    for n in [32usize, 128, 512, 2048] {
        let plan = ReplicationPlan::new(n, replications, 9000 + n as u64, f.clone(), psi.clone())?;
        let report = stats::mc_variance_gap(&prob, &plan)?;
        println!(
            "{:>6} {:>14.6e} {:>14.6e} {:>8}",
            n, report.mean_abs_gap, report.bound, report.pass
        );
    }

    // Tail coverage: how often the per-replication variance strays from the
    // across-replication mean, against the exponential bound.
    let plan = ReplicationPlan::new(256, 4000, 77, f, psi)?;
    let sup_f = plan.sup_f();
    let epsilons: Vec<f64> = [1.0f64, 0.5, 0.1]
        .iter()
        .map(|p| (32.0 * sup_f.powi(4) * (2.0 / p).ln() / 256.0).sqrt())
        .collect();
    let report = stats::concentration_coverage(&prob, &plan, &epsilons)?;
    println!(
        "\ntail coverage at N = {}, {} replications (center {:.6}):",
        report.sample_size, report.replications, report.center
    );
    println!("{:>12} {:>16} {:>12}", "epsilon", "empirical tail", "bound");
    for p in &report.points {
        println!(
            "{:>12.5} {:>16.5} {:>12.5}",
            p.epsilon, p.empirical_tail, p.bound
        );
    }
    println!("all points within bound plus binomial slack: {}", report.pass);
    Ok(())
}
