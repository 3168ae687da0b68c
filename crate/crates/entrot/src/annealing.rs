//! Decreasing-regularization solves: per-step schedules, the gap to the
//! unregularized optimum, and the checkers for the per-step bounds that
//! drive schedule design.
//!
//! The unregularized optimum has no closed form on discrete instances, so it
//! is certified by a bracket: a high-precision solve at a tiny
//! regularization yields a potential whose hard semi-dual lower-bounds the
//! optimum, while its soft semi-dual plus a concavity/Pinsker correction
//! upper-bounds it. The midpoint is returned with the half-width as the
//! certified residual; every gap measured against it inherits that residual
//! and nothing more.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, CheckOutcome, Regime};
use crate::error::{Error, Result};
use crate::sinkhorn::{Instance, Potential, Side};
use crate::tol;

/// Per-step regularization schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schedule {
    /// The same regularization at every step.
    Constant { lambda: f64 },
    /// `lambda_t = scale * t^(-exponent)` for `t >= 1`, clamped below at
    /// `floor`.
    Power {
        exponent: f64,
        scale: f64,
        #[serde(default)]
        floor: f64,
    },
}

impl Schedule {
    pub fn constant(lambda: f64) -> Result<Self> {
        let s = Schedule::Constant { lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn power(exponent: f64, scale: f64, floor: f64) -> Result<Self> {
        let s = Schedule::Power {
            exponent,
            scale,
            floor,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { lambda } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return Err(Error::InvalidParam {
                        name: "lambda",
                        reason: format!("constant schedule needs lambda > 0, got {lambda}"),
                    });
                }
            }
            Schedule::Power {
                exponent,
                scale,
                floor,
            } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(Error::InvalidParam {
                        name: "exponent",
                        reason: format!("must be finite and positive, got {exponent}"),
                    });
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::InvalidParam {
                        name: "scale",
                        reason: format!("must be finite and positive, got {scale}"),
                    });
                }
                if !(floor.is_finite() && floor >= 0.0) {
                    return Err(Error::InvalidParam {
                        name: "floor",
                        reason: format!("must be finite and nonnegative, got {floor}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Regularization used at step `t` (first step is `t = 1`).
    pub fn value(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::InvalidParam {
                name: "t",
                reason: "schedule steps start at one".into(),
            });
        }
        Ok(match *self {
            Schedule::Constant { lambda } => lambda,
            Schedule::Power {
                exponent,
                scale,
                floor,
            } => (scale * (t as f64).powf(-exponent)).max(floor),
        })
    }
}

/// Certified bracket around the unregularized semi-dual optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnregularizedReference {
    /// Bracket midpoint: the certified estimate.
    pub value: f64,
    /// Certified residual: the true optimum lies within `half_width` of
    /// `value`.
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    /// Regularization used for the certifying solve (zero when the cost is
    /// constant and the value is exact).
    pub lambda_ref: f64,
    /// Marginal divergence of the certifying iterate.
    pub kl: f64,
    /// The certifying potential (mean zero under the second marginal).
    pub psi: Potential,
    /// Total double transforms spent across the warm-start ladder.
    pub iters: usize,
}

/// One step of an annealed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealedRow {
    pub t: usize,
    pub lambda: f64,
    /// Semi-dual value at this step's regularization.
    pub e_reg: f64,
    /// Semi-dual value at zero regularization (hard conjugate).
    pub e_unreg: f64,
    /// Gap to the certified unregularized optimum.
    pub eta: f64,
    pub psi: Potential,
}

/// Full annealed run: rows, the schedule that produced them, and the
/// reference bracket the gaps are measured against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealedTrace {
    pub rows: Vec<AnnealedRow>,
    pub schedule: Schedule,
    pub reference: UnregularizedReference,
}

/// One point of the regularization-cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    /// Optimal transport cost plus `lambda` times the plan's divergence
    /// from the product measure.
    pub h: f64,
    /// Divergence of the optimal plan from the product measure; equals the
    /// slope of `h`.
    pub kl: f64,
}

/// Shape check over a sampled cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveCheck {
    pub nondecreasing: bool,
    pub midpoint_concave: bool,
    /// Largest decrease between consecutive values (zero when monotone).
    pub max_monotonicity_violation: f64,
    /// Largest amount by which a value dips below the chord of its
    /// neighbors (zero when concave).
    pub max_concavity_violation: f64,
    pub pass: bool,
}

/// Finite-difference check of the regularization sensitivity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCheck {
    /// Central finite difference of `lambda -> E(psi, lambda)`.
    pub fd: f64,
    /// The oscillation-based bound `6 c_inf / lambda`.
    pub bound: f64,
    /// The sharper bound `2 sup|psi - c| / lambda` after recentering `psi`
    /// to mean zero under `nu` and `c` to minimum zero.
    pub tight_bound: f64,
    pub pass: bool,
}

/// One full update at a prescribed regularization: the double transform of
/// `psi` at `lambda_next`.
pub fn annealed_step(inst: &Instance, psi: &Potential, lambda_next: f64) -> Result<Potential> {
    inst.problem(lambda_next)?.double_transform(psi)
}

/// Certified estimate of the unregularized semi-dual optimum, with the
/// default bracket-width budget.
pub fn unregularized_reference(inst: &Instance) -> Result<UnregularizedReference> {
    unregularized_reference_with(inst, None)
}

/// Same, with an explicit half-width budget; errors with "bracket too wide"
/// when the certificate cannot meet it.
pub fn unregularized_reference_with(
    inst: &Instance,
    requested_half_width: Option<f64>,
) -> Result<UnregularizedReference> {
    let c_osc = inst.c_osc();
    let n_y = inst.nu().len();
    if c_osc == 0.0 {
        // A constant cost makes every coupling optimal: the value is the
        // constant itself, exactly.
        let prob = inst.problem(1.0)?;
        let psi = Potential::zeros(Side::OnY, n_y);
        let value = prob.semi_dual_with(&psi, Some(0.0))?;
        return Ok(UnregularizedReference {
            value,
            half_width: 0.0,
            lower: value,
            upper: value,
            lambda_ref: 0.0,
            kl: 0.0,
            psi,
            iters: 0,
        });
    }

    let lambda_ref = tol::REFERENCE_LAMBDA_SCALE * c_osc;
    // Warm-start ladder: halve the regularization from the cost scale down
    // to the target, then polish. Each rung starts at the previous rung's
    // potential, so the expensive small-lambda regime is entered warm.
    let mut psi = Potential::zeros(Side::OnY, n_y);
    let mut iters = 0usize;
    let mut lam = c_osc;
    while lam > lambda_ref {
        let rung = inst
            .problem(lam)?
            .solve_reference_from(&psi, tol::LADDER_RUNG_MAX_ITERS, lam * 1e-6)?;
        psi = rung.psi;
        iters += rung.iters;
        lam *= 0.5;
    }
    // Polish tolerance chosen so the Pinsker correction below stays within
    // the bracket target: residual <= 5e-13 c_osc forces kl <= 5e-9, hence
    // bias <= lambda_ref.
    let polish_tol = 5.0e-13 * c_osc;
    let prob = inst.problem(lambda_ref)?;
    let polish = prob.solve_reference_from(&psi, tol::REFERENCE_MAX_ITERS, polish_tol)?;
    iters += polish.iters;
    if !polish.converged {
        return Err(Error::InvalidRegime {
            reason: format!(
                "certifying solve did not reach residual {polish_tol:.3e} within \
                 {} iterations",
                tol::REFERENCE_MAX_ITERS
            ),
        });
    }

    // Lower bound: the hard semi-dual of any potential. Upper bound: the
    // soft semi-dual at lambda_ref plus the concavity/Pinsker correction
    // 2 c_osc sqrt(kl/2) for the remaining suboptimality, since the
    // optimal-vs-iterate difference has oscillation at most 2 c_osc and the
    // semi-dual gradient is the marginal defect.
    let lower = prob.semi_dual_with(&polish.psi, Some(0.0))?;
    let bias = 2.0 * c_osc * (polish.kl.max(0.0) / 2.0).sqrt();
    let upper = polish.e + bias;
    let half_width = 0.5 * (upper - lower);
    // A point mass hiding most of the target weight stretches the
    // soft-to-hard gap by ln(1/weight), so the default budget carries that
    // factor.
    let min_pos = inst
        .nu()
        .weights()
        .iter()
        .copied()
        .filter(|w| *w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let requested =
        requested_half_width.unwrap_or_else(|| lambda_ref * (2.0 + (1.0 / min_pos).ln()));
    if half_width > requested {
        return Err(Error::BracketTooWide {
            half_width,
            requested,
        });
    }
    Ok(UnregularizedReference {
        value: 0.5 * (lower + upper),
        half_width,
        lower,
        upper,
        lambda_ref,
        kl: polish.kl,
        psi: polish.psi,
        iters,
    })
}

/// Run `t_max` annealed steps from the zero potential, recording per-step
/// values at the step's own regularization and at zero.
pub fn run_annealed(inst: &Instance, schedule: Schedule, t_max: usize) -> Result<AnnealedTrace> {
    schedule.validate()?;
    if t_max < 1 {
        return Err(Error::InvalidParam {
            name: "t_max",
            reason: "need at least one step".into(),
        });
    }
    let reference = unregularized_reference(inst)?;
    let mut psi = Potential::zeros(Side::OnY, inst.nu().len());
    let mut rows = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let lambda = schedule.value(t)?;
        let prob = inst.problem(lambda)?;
        psi = prob.double_transform(&psi)?;
        let e_reg = prob.semi_dual(&psi)?;
        let e_unreg = prob.semi_dual_with(&psi, Some(0.0))?;
        rows.push(AnnealedRow {
            t,
            lambda,
            e_reg,
            e_unreg,
            eta: reference.value - e_unreg,
            psi: psi.clone(),
        });
    }
    Ok(AnnealedTrace {
        rows,
        schedule,
        reference,
    })
}

/// Per-row sandwich check: the regularized value exceeds the unregularized
/// one by at least zero and at most the step's regularization.
pub fn verify_annealed_sandwich(trace: &AnnealedTrace) -> Vec<CheckOutcome> {
    trace
        .rows
        .iter()
        .map(|r| {
            let gap = r.e_reg - r.e_unreg;
            CheckOutcome {
                lhs: gap,
                rhs: r.lambda,
                slack: tol::SANDWICH_ABS,
                pass: gap >= -tol::SANDWICH_ABS && gap <= r.lambda + tol::SANDWICH_ABS,
            }
        })
        .collect()
}

/// Per-transition check of the gap recursion. The weak form
/// `eta_{t+1} <= eta_t + lambda_{t+1}` inherits the sandwich's upper side,
/// so it is guaranteed under the same small-oscillation condition; when a
/// regime is declared, the strong form with contraction `1 - 1/alpha(lambda)`
/// is also checked, with slack widened by the reference residual it leans
/// on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealedStepCheck {
    pub t: usize,
    pub weak: CheckOutcome,
    pub strong: Option<CheckOutcome>,
}

pub fn verify_annealed_recursion(
    trace: &AnnealedTrace,
    c_inf: f64,
    regime: Option<Regime>,
) -> Result<Vec<AnnealedStepCheck>> {
    let mut out = Vec::with_capacity(trace.rows.len().saturating_sub(1));
    for w in trace.rows.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let weak = CheckOutcome::upper(
            next.eta,
            prev.eta + next.lambda,
            tol::UNCONDITIONAL_SLACK_ABS,
        );
        let strong = match regime {
            None => None,
            Some(reg) => {
                let alpha = diagnostics::contraction_rate(reg, c_inf, next.lambda)?;
                Some(CheckOutcome::upper(
                    next.eta,
                    (1.0 - 1.0 / alpha) * prev.eta + next.lambda,
                    tol::UNCONDITIONAL_SLACK_ABS + trace.reference.half_width,
                ))
            }
        };
        out.push(AnnealedStepCheck {
            t: prev.t,
            weak,
            strong,
        });
    }
    Ok(out)
}

/// Sample the regularization-cost curve: per `lambda`, a reference solve
/// yields the optimal plan; the curve value is transport cost plus `lambda`
/// times the plan's divergence from the product measure, whose value is the
/// curve's slope.
pub fn entropic_cost_curve(inst: &Instance, lambdas: &[f64]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let prob = inst.problem(lambda)?;
        let reference = prob.solve_reference()?;
        if !reference.converged {
            return Err(Error::InvalidRegime {
                reason: format!("reference solve at lambda = {lambda} did not converge"),
            });
        }
        let kl = prob.plan_product_kl(&reference.psi)?;
        let h = prob.transport_cost(&reference.psi)? + lambda * kl;
        out.push(CurvePoint { lambda, h, kl });
    }
    Ok(out)
}

/// Shape check for a sampled cost curve: nondecreasing in `lambda` and
/// concave (each value at or above the chord of its neighbors).
pub fn check_cost_curve(points: &[CurvePoint]) -> CurveCheck {
    let mut max_mono: f64 = 0.0;
    for w in points.windows(2) {
        max_mono = max_mono.max(w[0].h - w[1].h);
    }
    let mut max_conc: f64 = 0.0;
    for w in points.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let span = c.lambda - a.lambda;
        if span > 0.0 {
            let chord = a.h + (c.h - a.h) * (b.lambda - a.lambda) / span;
            max_conc = max_conc.max(chord - b.h);
        }
    }
    let nondecreasing = max_mono <= tol::CURVE_SLACK_ABS;
    let midpoint_concave = max_conc <= tol::CURVE_SLACK_ABS;
    CurveCheck {
        nondecreasing,
        midpoint_concave,
        max_monotonicity_violation: max_mono,
        max_concavity_violation: max_conc,
        pass: nondecreasing && midpoint_concave,
    }
}

/// Central finite difference of `lambda -> E(psi, lambda)` against the
/// oscillation bound `6 c_inf / lambda`.
pub fn regularization_sensitivity_check(
    inst: &Instance,
    psi: &Potential,
    lambda: f64,
    h_step: f64,
) -> Result<SensitivityCheck> {
    if !(h_step.is_finite() && h_step > 0.0 && lambda - h_step > 0.0) {
        return Err(Error::InvalidParam {
            name: "h_step",
            reason: format!("need 0 < h_step < lambda, got h_step = {h_step}, lambda = {lambda}"),
        });
    }
    let prob = inst.problem(lambda)?;
    let plus = prob.semi_dual_with(psi, Some(lambda + h_step))?;
    let minus = prob.semi_dual_with(psi, Some(lambda - h_step))?;
    let fd = (plus - minus) / (2.0 * h_step);
    let c_inf = inst.c_osc();
    let bound = 6.0 * c_inf / lambda;
    // The sensitivity is invariant to shifting psi by a constant and c by a
    // constant, so the sharp sup-norm is taken after recentering both.
    let centered = psi.mean_zero_under(inst.nu())?;
    let c_min = inst
        .cost()
        .entries()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut sup = 0.0f64;
    let n_y = inst.nu().len();
    for i in 0..inst.mu().len() {
        let row = inst.cost().row(i);
        for j in 0..n_y {
            sup = sup.max((centered.values()[j] - (row[j] - c_min)).abs());
        }
    }
    let tight_bound = 2.0 * sup / lambda;
    Ok(SensitivityCheck {
        fd,
        bound,
        tight_bound,
        pass: fd.abs() <= bound + tol::DEDLAMBDA_ABS,
    })
}
