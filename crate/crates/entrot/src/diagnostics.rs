//! Guaranteed-rate constants and the inequality verifiers that run over
//! solver traces.
//!
//! The constant formulas are pure closed forms in the cost oscillation
//! `c_inf`, the regularization `lambda`, and (for the curvature-aware
//! regime) the cost's concavity modulus, support radius, and the target
//! marginal's weight ratio `kappa`. The verifiers compare measured trace
//! quantities against these guarantees: the one-step improvement and the
//! variance-comparison inequality hold unconditionally, while the
//! contraction and variance-vs-gap bounds depend on structural hypotheses a
//! discretized instance only approximates, so their violations are reported
//! as findings rather than hard failures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{self, DiscreteMeasure};
use crate::num;
use crate::sinkhorn::{Potential, Problem, SinkhornTrace};
use crate::tol;

/// Which set of structural hypotheses the rate constants assume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Curvature-aware constants: consume the cost's concavity modulus `xi`,
    /// the first support's radius `r_x`, and the weight ratio `kappa`
    /// (max/min) of the target marginal.
    Curvature { kappa: f64, xi: f64, r_x: f64 },
    /// Constants from the cost oscillation alone.
    Bounded,
    /// Sharper oscillation-only constants available under stronger
    /// structural hypotheses (linear cost, log-concave first marginal).
    BoundedSharp,
}

impl Regime {
    fn validate(&self) -> Result<()> {
        if let Regime::Curvature { kappa, xi, r_x } = self {
            if !(kappa.is_finite() && *kappa >= 1.0) {
                return Err(Error::InvalidParam {
                    name: "kappa",
                    reason: format!("must be at least one, got {kappa}"),
                });
            }
            if !(xi.is_finite() && *xi >= 0.0) || !(r_x.is_finite() && *r_x >= 0.0) {
                return Err(Error::InvalidParam {
                    name: "xi/r_x",
                    reason: "must be finite and nonnegative".into(),
                });
            }
        }
        Ok(())
    }

    /// The effective cost scale the curvature regime substitutes for the
    /// oscillation: `(c_inf + (xi/2) r_x^2) kappa`.
    fn effective_cost(&self, c_inf: f64) -> f64 {
        match self {
            Regime::Curvature { kappa, xi, r_x } => (c_inf + 0.5 * xi * r_x * r_x) * kappa,
            Regime::Bounded | Regime::BoundedSharp => c_inf,
        }
    }
}

fn validate_rate_inputs(c_inf: f64, lambda: f64) -> Result<()> {
    if !(c_inf.is_finite() && c_inf >= 0.0) {
        return Err(Error::InvalidParam {
            name: "c_inf",
            reason: format!("must be finite and nonnegative, got {c_inf}"),
        });
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParam {
            name: "lambda",
            reason: format!("must be finite and positive, got {lambda}"),
        });
    }
    Ok(())
}

/// Guaranteed contraction constant `alpha`: the gap satisfies
/// `delta_{t+1} <= (1 - 1/alpha) delta_t` on instances meeting the regime's
/// hypotheses.
pub fn contraction_rate(regime: Regime, c_inf: f64, lambda: f64) -> Result<f64> {
    regime.validate()?;
    validate_rate_inputs(c_inf, lambda)?;
    let value = match regime {
        Regime::Curvature { .. } => {
            176.0
                * (1.0
                    + regime.effective_cost(c_inf) / lambda
                    + c_inf * c_inf / (lambda * lambda))
        }
        Regime::Bounded => 176.0 * (1.0 + c_inf / lambda + c_inf * c_inf / (lambda * lambda)),
        Regime::BoundedSharp => 176.0 * (1.0 + c_inf / lambda),
    };
    Ok(value)
}

/// Improved contraction constant valid after `burn_in_steps` iterations: the
/// squared cost term drops out (the sharp regime has nothing to drop).
pub fn contraction_rate_tail(regime: Regime, c_inf: f64, lambda: f64) -> Result<f64> {
    regime.validate()?;
    validate_rate_inputs(c_inf, lambda)?;
    Ok(176.0 * (1.0 + regime.effective_cost(c_inf) / lambda))
}

/// Constants `(C1, C2)` of the variance bound
/// `Var_nu(psi_star - psi_t) <= C1 delta_t + C2 (delta_t - delta_{t+1})`.
pub fn variance_bound_constants(regime: Regime, c_inf: f64, lambda: f64) -> Result<(f64, f64)> {
    regime.validate()?;
    validate_rate_inputs(c_inf, lambda)?;
    Ok(match regime {
        Regime::Curvature { .. } => (
            11.0 * (regime.effective_cost(c_inf) + lambda + c_inf * c_inf / lambda),
            0.0,
        ),
        Regime::Bounded => (11.0 * (c_inf + lambda + c_inf * c_inf / lambda), 0.0),
        Regime::BoundedSharp => (11.0 * (c_inf + lambda), 3.0 * c_inf * c_inf / lambda),
    })
}

/// Contraction constant derived from variance-bound constants:
/// `alpha = max{16 C1 / lambda, 4 sqrt(C2 / lambda) + (28 c_inf)/(3 lambda)}`.
pub fn contraction_from_bounds(c1: f64, c2: f64, c_inf: f64, lambda: f64) -> Result<f64> {
    validate_rate_inputs(c_inf, lambda)?;
    if !(c1.is_finite() && c1 >= 0.0 && c2.is_finite() && c2 >= 0.0) {
        return Err(Error::InvalidParam {
            name: "c1/c2",
            reason: "must be finite and nonnegative".into(),
        });
    }
    let first = 16.0 * c1 / lambda;
    let second = 4.0 * (c2 / lambda).sqrt() + 28.0 * c_inf / (3.0 * lambda);
    Ok(first.max(second))
}

/// Number of iterations after which the improved tail constants apply:
/// `ceil( ln(4 C1 delta0 / min_weight^2) / (-ln(1 - 1/alpha)) )`, or zero
/// when the argument of the logarithm is already at most one.
pub fn burn_in_steps(c1: f64, alpha: f64, delta0: f64, min_weight: f64) -> Result<u64> {
    if !(c1 > 0.0 && alpha > 1.0 && delta0 > 0.0 && min_weight > 0.0)
        || !(c1.is_finite() && alpha.is_finite() && delta0.is_finite() && min_weight.is_finite())
    {
        return Err(Error::InvalidParam {
            name: "burn_in_steps",
            reason: "requires c1, delta0, min_weight > 0 and alpha > 1".into(),
        });
    }
    let arg = 4.0 * c1 * delta0 / (min_weight * min_weight);
    if arg <= 1.0 {
        return Ok(0);
    }
    let rate = -(-1.0 / alpha).ln_1p();
    Ok((arg.ln() / rate).ceil() as u64)
}

/// Outcome of a single inequality check: `pass` iff `lhs <= rhs + slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl CheckOutcome {
    pub fn upper(lhs: f64, rhs: f64, slack: f64) -> Self {
        CheckOutcome {
            lhs,
            rhs,
            slack,
            pass: lhs <= rhs + slack,
        }
    }

    /// Signed margin; nonnegative iff the check passes.
    pub fn margin(&self) -> f64 {
        self.rhs + self.slack - self.lhs
    }
}

/// Unconditional one-step improvement: the current gap is controlled by the
/// per-step decrement,
/// `delta_t <= 2 sqrt(var_gap (delta_t - delta_{t+1}) / lambda)
///  + (14 c_inf / 3) (delta_t - delta_{t+1}) / lambda`,
/// with slack `1e-9 + 2 residual` absorbing reference bias.
pub fn verify_one_step(
    delta_t: f64,
    delta_next: f64,
    var_gap: f64,
    c_inf: f64,
    lambda: f64,
    residual: f64,
) -> CheckOutcome {
    let dec = (delta_t - delta_next).max(0.0);
    let rhs = 2.0 * (var_gap.max(0.0) * dec / lambda).sqrt()
        + (14.0 * c_inf / 3.0) * dec / lambda;
    CheckOutcome::upper(delta_t, rhs, tol::UNCONDITIONAL_SLACK_ABS + 2.0 * residual)
}

/// Run the one-step check across all consecutive rows of a trace.
pub fn verify_one_step_trace(trace: &SinkhornTrace, c_inf: f64) -> Vec<CheckOutcome> {
    trace
        .rows
        .windows(2)
        .map(|w| {
            verify_one_step(
                w[0].delta,
                w[1].delta,
                w[0].var_gap,
                c_inf,
                trace.lambda,
                trace.residual,
            )
        })
        .collect()
}

/// Regime-conditional variance bound:
/// `var_gap <= C1 delta_t + C2 (delta_t - delta_{t+1})`, slack proportional
/// to the constants times the trace residual.
pub fn verify_variance_subopt(
    delta_t: f64,
    delta_next: f64,
    var_gap: f64,
    c1: f64,
    c2: f64,
    residual: f64,
) -> CheckOutcome {
    let dec = (delta_t - delta_next).max(0.0);
    let rhs = c1 * delta_t + c2 * dec;
    let slack = tol::UNCONDITIONAL_SLACK_ABS + (c1 + c2 + 1.0) * residual;
    CheckOutcome::upper(var_gap, rhs, slack)
}

/// Run the variance bound across all consecutive rows of a trace.
pub fn verify_variance_subopt_trace(trace: &SinkhornTrace, c1: f64, c2: f64) -> Vec<CheckOutcome> {
    trace
        .rows
        .windows(2)
        .map(|w| verify_variance_subopt(w[0].delta, w[1].delta, w[0].var_gap, c1, c2, trace.residual))
        .collect()
}

/// Per-step record of the contraction check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionStep {
    pub t: usize,
    pub delta_t: f64,
    pub delta_next: f64,
    /// `delta_{t+1} / delta_t`; zero when the denominator vanishes.
    pub ratio: f64,
    /// The guaranteed bound `1 - 1/alpha`.
    pub bound: f64,
    /// Steps with `delta_t < 100 residual` are excluded: there the measured
    /// gap is dominated by reference bias.
    pub eligible: bool,
    pub pass: bool,
}

/// Full contraction report over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub alpha: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    pub steps: Vec<ContractionStep>,
    pub eligible_steps: usize,
    pub violations: usize,
    pub pass: bool,
}

/// Check `delta_{t+1} <= (1 - 1/alpha) delta_t` on every eligible step.
pub fn verify_contraction(trace: &SinkhornTrace, alpha: f64) -> Result<ContractionReport> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::InvalidParam {
            name: "alpha",
            reason: format!("must exceed one, got {alpha}"),
        });
    }
    let bound = 1.0 - 1.0 / alpha;
    let floor = 100.0 * trace.residual;
    let mut steps = Vec::with_capacity(trace.rows.len().saturating_sub(1));
    let mut eligible_steps = 0;
    let mut violations = 0;
    for w in trace.rows.windows(2) {
        let (d0, d1) = (w[0].delta, w[1].delta);
        let eligible = d0 >= floor && d0 > 0.0;
        let ratio = if d0 > 0.0 { d1 / d0 } else { 0.0 };
        let pass = !eligible || d1 <= bound * d0 + f64::EPSILON * d0;
        if eligible {
            eligible_steps += 1;
            if !pass {
                violations += 1;
            }
        }
        steps.push(ContractionStep {
            t: w[0].t,
            delta_t: d0,
            delta_next: d1,
            ratio,
            bound,
            eligible,
            pass,
        });
    }
    Ok(ContractionReport {
        alpha,
        bound,
        c1: None,
        c2: None,
        burn_in: None,
        steps,
        eligible_steps,
        violations,
        pass: violations == 0,
    })
}

/// Unconditional variance comparison between mutually absolutely continuous
/// measures on the same ordered support:
/// `Var_rho(f) >= (1/2) Var_pi(f) - (max f - min f)^2 min(KL(rho|pi), KL(pi|rho))`.
pub fn verify_variance_comparison(
    rho: &DiscreteMeasure,
    pi: &DiscreteMeasure,
    f: &[f64],
) -> Result<CheckOutcome> {
    if rho.len() != pi.len() || rho.dim() != pi.dim() {
        return Err(Error::SupportMismatch {
            reason: "measures must share one support".into(),
        });
    }
    for i in 0..rho.len() {
        if rho.point(i) != pi.point(i) {
            return Err(Error::SupportMismatch {
                reason: format!("support points differ at index {i}"),
            });
        }
    }
    if f.len() != rho.len() {
        return Err(Error::LengthMismatch {
            what: "test function",
            expected: rho.len(),
            got: f.len(),
        });
    }
    let kl_fwd = measure::kl_divergence(rho, pi)?;
    let kl_bwd = measure::kl_divergence(pi, rho)?;
    let kl = kl_fwd.min(kl_bwd);
    if !kl.is_finite() {
        return Err(Error::SupportMismatch {
            reason: "measures are not mutually absolutely continuous".into(),
        });
    }
    let osc = num::oscillation(f);
    let lhs = 0.5 * num::weighted_variance(pi.weights(), f) - osc * osc * kl;
    let rhs = num::weighted_variance(rho.weights(), f);
    Ok(CheckOutcome::upper(lhs, rhs, tol::VARIANCE_COMPARISON_ABS))
}

/// Pointwise convexity of one full Sinkhorn update in the potential:
/// the update of the mixture lies below the mixture of the updates. Returns
/// the worst pointwise violation as a single check.
pub fn verify_transform_convexity(
    prob: &Problem,
    psi0: &Potential,
    psi1: &Potential,
    weight: f64,
) -> Result<CheckOutcome> {
    if !(weight.is_finite() && (0.0..=1.0).contains(&weight)) {
        return Err(Error::InvalidParam {
            name: "weight",
            reason: format!("must lie in [0, 1], got {weight}"),
        });
    }
    if psi0.len() != psi1.len() {
        return Err(Error::LengthMismatch {
            what: "potential pair",
            expected: psi0.len(),
            got: psi1.len(),
        });
    }
    let mixed = Potential::on_y(
        psi0.values()
            .iter()
            .zip(psi1.values())
            .map(|(a, b)| (1.0 - weight) * a + weight * b)
            .collect(),
    )?;
    let lhs = prob.double_transform(&mixed)?;
    let up0 = prob.double_transform(psi0)?;
    let up1 = prob.double_transform(psi1)?;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..lhs.len() {
        let rhs = (1.0 - weight) * up0.values()[j] + weight * up1.values()[j];
        worst = worst.max(lhs.values()[j] - rhs);
    }
    Ok(CheckOutcome::upper(worst, 0.0, tol::CONVEXITY_ABS))
}

/// Second-order upper model of the semi-dual along a bounded direction: for
/// `osc(v) <= 1` and `|s| <= lambda/6`,
/// `E(psi + s v) <= E(psi) + s <nu - nu[psi], v>
///  - (s^2 / (4 lambda)) E_mu Var_row(v)`.
pub fn verify_second_order_model(
    prob: &Problem,
    psi: &Potential,
    v: &[f64],
    s: f64,
) -> Result<CheckOutcome> {
    if num::oscillation(v) > 1.0 + 1e-12 {
        return Err(Error::InvalidParam {
            name: "v",
            reason: "direction must have oscillation at most one".into(),
        });
    }
    if !(s.is_finite() && s.abs() <= prob.lambda() / 6.0 + 1e-15) {
        return Err(Error::InvalidParam {
            name: "s",
            reason: format!("|s| must not exceed lambda/6, got {s}"),
        });
    }
    let lambda = prob.lambda();
    let fam = prob.conditionals(psi)?;
    let mu_w = prob.mu().weights();
    let nu_w = prob.nu().weights();
    let mixed = fam.mix(mu_w);
    let mut slope = 0.0;
    for j in 0..v.len() {
        slope += (nu_w[j] - mixed[j]) * v[j];
    }
    let mut mean_var = 0.0;
    for i in 0..fam.n_x() {
        mean_var += mu_w[i] * fam.row_variance(i, v);
    }
    let e0 = prob.semi_dual(psi)?;
    let e1 = prob.semi_dual(&psi.plus_scaled(v, s)?)?;
    let rhs = e0 + s * slope - s * s / (4.0 * lambda) * mean_var;
    Ok(CheckOutcome::upper(e1, rhs, tol::LOCAL_MODEL_ABS))
}

/// Finite-difference audit of the analytic directional derivatives of the
/// soft conjugate: at each first-support point,
/// `d/de T(psi + e v)(x) = -<v, row_x>` and
/// `d^2/de^2 = -(1/lambda) Var_row_x(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdAudit {
    /// Max error of the first derivative, relative to
    /// `max(sup_x |analytic|, 1)`.
    pub max_rel_first: f64,
    /// Same for the second derivative.
    pub max_rel_second: f64,
    /// Largest analytic second derivative; concavity demands it be <= 0.
    pub max_second: f64,
    /// Largest finite-difference second derivative.
    pub max_fd_second: f64,
    pub pass_first: bool,
    pub pass_second: bool,
    pub pass: bool,
}

pub fn fd_derivative_audit(prob: &Problem, psi: &Potential, v: &[f64], h: f64) -> Result<FdAudit> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParam {
            name: "h",
            reason: format!("step must be positive, got {h}"),
        });
    }
    let lambda = prob.lambda();
    let fam = prob.conditionals(psi)?;
    let n_x = fam.n_x();
    let mut first = vec![0.0; n_x];
    let mut second = vec![0.0; n_x];
    for i in 0..n_x {
        first[i] = -fam.row_expectation(i, v);
        second[i] = -fam.row_variance(i, v) / lambda;
    }
    let plus = prob.c_transform(&psi.plus_scaled(v, h)?)?;
    let minus = prob.c_transform(&psi.plus_scaled(v, -h)?)?;
    let base = prob.c_transform(psi)?;
    let mut err1: f64 = 0.0;
    let mut err2: f64 = 0.0;
    let mut max_fd_second = f64::NEG_INFINITY;
    for i in 0..n_x {
        let fd1 = (plus.values()[i] - minus.values()[i]) / (2.0 * h);
        let fd2 = (plus.values()[i] - 2.0 * base.values()[i] + minus.values()[i]) / (h * h);
        err1 = err1.max((fd1 - first[i]).abs());
        err2 = err2.max((fd2 - second[i]).abs());
        max_fd_second = max_fd_second.max(fd2);
    }
    // Relative to the analytic scale, floored at the unit scale so that
    // degenerate directions (constant v) compare the absolute noise floor
    // against the tolerance instead of dividing by zero.
    let scale1 = num::sup_abs(&first).max(1.0);
    let scale2 = num::sup_abs(&second).max(1.0);
    let max_rel_first = err1 / scale1;
    let max_rel_second = err2 / scale2;
    let max_second = second.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass_first = max_rel_first <= tol::FD_FIRST_REL;
    let pass_second = max_rel_second <= tol::FD_SECOND_REL;
    Ok(FdAudit {
        max_rel_first,
        max_rel_second,
        max_second,
        max_fd_second,
        pass_first,
        pass_second,
        pass: pass_first && pass_second && max_second <= 0.0,
    })
}
