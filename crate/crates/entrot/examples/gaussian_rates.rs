//! The one-dimensional Gaussian instance with bilinear cost has a scalar
//! recursion for the quadratic coefficient of the potential, an exact
//! optimal value, and certified lower bounds on how fast the optimality gap
//! can shrink. This example prints the analytic gap series next to both
//! certificates and measures the limiting per-step ratios.
//!
//! Run with `cargo run --example gaussian_rates`.

use entrot::gaussian::GaussianProblem;

fn main() -> entrot::Result<()> {
    let g = GaussianProblem::new(1.0, 0.1)?;
    println!(
        "sigma = {}, lambda = {}: fixed point alpha* = {:.9}, optimal value {:.9}\n",
        g.sigma(),
        g.lambda(),
        g.fixed_point_alpha(),
        g.optimal_value()
    );

    let series = g.centered_series(60)?;
    println!(
        "{:>4} {:>14} {:>14} {:>14}",
        "t", "gap", "plain bound", "sharp bound"
    );
    for p in series.iter().step_by(10) {
        let (simple, sharp) = g.gap_lower_bound_pair(p.t)?;
        println!(
            "{:>4} {:>14.6e} {:>14.6e} {:>14.6e}",
            p.t, p.delta, simple, sharp
        );
    }

    // Both certificates sit below the gap at every step.
    let all_above = series.iter().all(|p| {
        let (simple, sharp) = g.gap_lower_bound_pair(p.t).unwrap();
        p.delta >= simple - 1e-12 && p.delta >= sharp - 1e-12
    });
    println!("\ngap dominates both certificates at every step: {all_above}");

    // Near the fixed point the coefficient offset contracts at the map's
    // derivative and the gap at its square.
    let tail = &series[40..50];
    let coeff_ratio = tail[1].d / tail[0].d;
    let gap_ratio = tail[1].delta / tail[0].delta;
    println!(
        "measured coefficient ratio {:.9} vs analytic limit {:.9}",
        coeff_ratio,
        g.limiting_ratio()
    );
    println!(
        "measured gap ratio         {:.9} vs analytic limit {:.9}",
        gap_ratio,
        g.limiting_delta_ratio()
    );
    Ok(())
}
