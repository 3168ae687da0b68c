//! Solve a small random instance and walk through the per-iteration trace:
//! the semi-dual value climbs, the gap to the reference optimum shrinks, and
//! every consecutive pair of rows satisfies the one-step improvement
//! inequality that ties the gap to the per-step decrement.
//!
//! Run with `cargo run --example solve_trace`.

use entrot::diagnostics;
use entrot::sinkhorn::{Potential, Side};
use entrot::synthetic;

fn main() -> entrot::Result<()> {
    let prob = synthetic::random_problem(7, 25, 20, 0.4, 1.0);
    let psi0 = Potential::zeros(Side::OnY, prob.nu().len());
    let trace = prob.solve(&psi0, 10_000, 1e-12)?;

    println!(
        "instance: {}x{} support, cost oscillation {:.4}, lambda {}",
        prob.mu().len(),
        prob.nu().len(),
        prob.cost().oscillation(),
        trace.lambda
    );
    println!(
        "converged: {} after {} iterations, residual {:.3e}\n",
        trace.converged, trace.iters, trace.residual
    );

    println!("{:>4} {:>14} {:>12} {:>12} {:>12}", "t", "E", "delta", "kl", "var_gap");
    for row in trace.rows.iter().take(8) {
        println!(
            "{:>4} {:>14.9} {:>12.3e} {:>12.3e} {:>12.3e}",
            row.t, row.e, row.delta, row.kl, row.var_gap
        );
    }
    if trace.rows.len() > 8 {
        println!("  ... {} more rows", trace.rows.len() - 8);
    }

    let checks = diagnostics::verify_one_step_trace(&trace, prob.cost().oscillation());
    let worst = checks
        .iter()
        .map(|c| c.margin())
        .fold(f64::INFINITY, f64::min);
    let all_pass = checks.iter().all(|c| c.pass);
    println!(
        "\none-step improvement holds on all {} transitions: {} (worst margin {:.3e})",
        checks.len(),
        all_pass,
        worst
    );

    // The variance of the potential error is itself controlled by the gap.
    let (c1, c2) = diagnostics::variance_bound_constants(
        diagnostics::Regime::Bounded,
        prob.cost().oscillation(),
        trace.lambda,
    )?;
    let var_checks = diagnostics::verify_variance_subopt_trace(&trace, c1, c2);
    println!(
        "variance-suboptimality bound (C1 = {:.3}, C2 = {:.3}) holds on all transitions: {}",
        c1,
        c2,
        var_checks.iter().all(|c| c.pass)
    );
    Ok(())
}
