//! Centralized numeric tolerances.
//!
//! Every identity and inequality checked by this crate uses one of the
//! constants below; tests and the runner never invent ad-hoc tolerances.
//! Constants are grouped by the kind of comparison they guard.

/// Weights of a constructed measure sum to one within this.
pub const WEIGHT_SUM_ABS: f64 = 1e-12;

/// Conditional-family rows sum to one within this.
pub const ROW_SUM_ABS: f64 = 1e-12;

/// Total mass of a coupling, and the exponential-mass identity, hold within this.
pub const MASS_IDENTITY_ABS: f64 = 1e-12;

/// First marginal of a coupling reproduces `mu` within this (sup norm).
pub const MARGINAL_ABS: f64 = 1e-12;

/// Adding a constant to the potential shifts its transform by the exact
/// negative constant within this (sup norm).
pub const TRANSLATION_ABS: f64 = 1e-12;

/// Oscillation of a transform output stays below the cost oscillation plus this.
pub const OSC_BOUND_ABS: f64 = 1e-12;

/// Joint rescaling of (potential, cost, regularization) commutes with the
/// transform and the semi-dual value within this.
pub const HOMOGENEITY_ABS: f64 = 1e-10;

/// The inner-product expression for the marginal divergence agrees with the
/// directly computed divergence within this.
pub const KL_IDENTITY_ABS: f64 = 1e-10;

/// Per-step improvement of the semi-dual equals the regularization times the
/// marginal divergence within this.
pub const IMPROVEMENT_IDENTITY_ABS: f64 = 1e-10;

/// The optimality gap equals the scaled divergence between couplings within
/// this plus residual terms.
pub const GAP_IDENTITY_ABS: f64 = 1e-9;

/// Base slack for unconditional inequalities (residual terms are added at the
/// call site).
pub const UNCONDITIONAL_SLACK_ABS: f64 = 1e-9;

/// Slack for the variance comparison between mutually absolutely continuous
/// measures.
pub const VARIANCE_COMPARISON_ABS: f64 = 1e-10;

/// Slack for the pointwise convexity of the double transform under a
/// log-concave first marginal with bilinear cost.
pub const CONVEXITY_ABS: f64 = 1e-10;

/// Slack for the second-order upper model of the semi-dual along a direction.
pub const LOCAL_MODEL_ABS: f64 = 1e-10;

/// Slack for conditional-variance domination inequalities.
pub const DOMINATION_ABS: f64 = 1e-10;

/// The law-of-total-variance identity holds within this.
pub const TOTAL_VARIANCE_ABS: f64 = 1e-12;

/// Agreement expected between a ratio measured next to the fixed point
/// (entered once the iterate is within 1e-9 of it) and its analytic limit.
pub const GAUSSIAN_RATIO_ABS: f64 = 1e-6;

/// An iterate counts as "at the fixed point" for ratio measurements once
/// its distance drops below this.
pub const RATIO_WINDOW_ABS: f64 = 1e-9;

/// Max relative error allowed for the finite-difference check of the first
/// directional derivative of the transform.
pub const FD_FIRST_REL: f64 = 1e-5;

/// Max relative error allowed for the finite-difference check of the second
/// directional derivative of the transform.
pub const FD_SECOND_REL: f64 = 1e-4;

/// Default step for finite-difference derivative audits.
pub const FD_DEFAULT_STEP: f64 = 1e-4;

/// Closed-form constants reproduce hand values to this relative accuracy.
pub const CONSTANTS_REL: f64 = 1e-12;

/// Monotonicity / midpoint concavity slack for the value curve in the
/// regularization parameter.
pub const CURVE_SLACK_ABS: f64 = 1e-9;

/// Relative tolerance for the finite-difference slope of the value curve
/// against the divergence of the optimal coupling.
pub const CURVE_SLOPE_REL: f64 = 1e-3;

/// Slack for the sandwich between regularized and unregularized semi-dual
/// values along an annealed run.
pub const SANDWICH_ABS: f64 = 1e-10;

/// Absolute slack for the bound on the derivative of the semi-dual value in
/// the regularization parameter.
pub const DEDLAMBDA_ABS: f64 = 1e-6;

/// Reference solves stop when `lambda * kl <= REFERENCE_TOL_SCALE * max(1, c_osc)`.
pub const REFERENCE_TOL_SCALE: f64 = 1e-13;

/// Iteration cap for reference solves.
pub const REFERENCE_MAX_ITERS: usize = 1_000_000;

/// The certifying solve for the unregularized optimum runs at
/// `REFERENCE_LAMBDA_SCALE * c_osc`.
pub const REFERENCE_LAMBDA_SCALE: f64 = 1e-4;

/// Iteration cap for each warm-start rung on the way down to the certifying
/// regularization.
pub const LADDER_RUNG_MAX_ITERS: usize = 200_000;

/// Per-step ratio checks skip steps whose gap is below this multiple of the
/// stopping residual (ratio estimates below that scale are noise-dominated).
pub const RATIO_ELIGIBLE_FACTOR: f64 = 100.0;

/// An iterate counts as "close to the fixed point" for limiting-ratio
/// measurements once the scalar coefficient is within this of its limit.
pub const RATIO_THRESHOLD: f64 = 1e-9;

/// Scalar fixed-point identity for the closed-form recursion holds within this.
pub const FIXED_POINT_ABS: f64 = 1e-13;
