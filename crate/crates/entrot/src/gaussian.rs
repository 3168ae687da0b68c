//! Closed forms for the one-dimensional Gaussian problem with bilinear cost.
//!
//! With first marginal `N(0, 1)`, second marginal `N(0, sigma^2)`, cost
//! `c(x, y) = -x y`, and regularization `lambda`, quadratic potentials stay
//! quadratic under the soft conjugate: `psi(y) = alpha y^2 + beta` maps to
//! `phi(x) = gamma x^2 + omega` with
//!
//! ```text
//! gamma = sigma^2 / (4 sigma^2 alpha - 2 lambda)
//! omega = -beta + (lambda/2) ln(1 - (2 sigma^2/lambda) alpha)
//! ```
//!
//! and symmetrically back. Composing both directions gives an explicit
//! linear-fractional recursion for `alpha` whose unique attracting fixed
//! point, semi-dual values, optimality gaps, and per-step lower bounds all
//! have closed forms. The gap evaluation is arranged so that the
//! stationarity cancellation is done in exact algebra, keeping full relative
//! accuracy even when the gap underflows toward `1e-300`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `-ln(1 - u) - u`, evaluated with full relative accuracy for small `u`.
/// Nonnegative for every `u < 1`.
fn ln_one_minus_residual(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        u2 * (0.5 + u / 3.0 + u2 * 0.25 + u2 * u * 0.2)
    } else {
        -(-u).ln_1p() - u
    }
}

/// One iterate of the quadratic-coefficient recursion, together with the
/// transform it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianIterate {
    pub t: usize,
    /// Quadratic coefficient of the potential on the second marginal.
    pub alpha: f64,
    /// Constant term of that potential.
    pub beta: f64,
    /// Quadratic coefficient of its soft conjugate on the first marginal.
    pub gamma: f64,
    /// Constant term of the conjugate.
    pub omega: f64,
}

/// A point of the centered gap series: distance to the fixed point and the
/// semi-dual suboptimality it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredPoint {
    pub t: usize,
    /// `alpha_t - alpha_star`.
    pub d: f64,
    /// `alpha_star + d`, for reporting.
    pub alpha: f64,
    /// Optimality gap of the iterate, always nonnegative.
    pub delta: f64,
}

/// The Gaussian instance `N(0,1) -> N(0, sigma^2)` with cost `-xy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianProblem {
    sigma: f64,
    lambda: f64,
}

impl GaussianProblem {
    pub fn new(sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParam {
                name: "sigma",
                reason: format!("must be finite and positive, got {sigma}"),
            });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParam {
                name: "lambda",
                reason: format!("must be finite and positive, got {lambda}"),
            });
        }
        Ok(GaussianProblem { sigma, lambda })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Variance of the second marginal.
    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `sqrt(4 sigma^2 + lambda^2)`.
    fn sqrt_s(&self) -> f64 {
        (4.0 * self.sigma2() + self.lambda * self.lambda).sqrt()
    }

    /// Denominator of the composed recursion, `2 sigma^2 + 2 lambda^2
    /// - 4 lambda sigma^2 alpha`; positive on the whole validity domain.
    pub fn map_denominator(&self, alpha: f64) -> f64 {
        2.0 * self.sigma2() + 2.0 * self.lambda * self.lambda
            - 4.0 * self.lambda * self.sigma2() * alpha
    }

    /// Quadratic coefficients must satisfy `alpha < lambda / (2 sigma^2)`
    /// for the conjugate integral to converge.
    pub fn in_domain(&self, alpha: f64) -> bool {
        alpha.is_finite() && 2.0 * self.sigma2() * alpha < self.lambda
    }

    fn expect_in_domain(&self, alpha: f64) -> Result<()> {
        if self.in_domain(alpha) {
            Ok(())
        } else {
            Err(Error::InvalidRegime {
                reason: format!(
                    "quadratic coefficient {alpha} is outside the validity domain \
                     alpha < lambda / (2 sigma^2) = {}",
                    self.lambda / (2.0 * self.sigma2())
                ),
            })
        }
    }

    /// The lower-bound certificates hold only in the small-regularization
    /// regime `lambda <= sigma / 5`.
    pub fn expect_certificate_regime(&self) -> Result<()> {
        if self.lambda <= self.sigma / 5.0 {
            Ok(())
        } else {
            Err(Error::InvalidRegime {
                reason: format!(
                    "lower-bound certificates require lambda <= sigma/5, got lambda = {} \
                     with sigma = {}",
                    self.lambda, self.sigma
                ),
            })
        }
    }

    /// Soft conjugate of `alpha y^2 + beta`: returns `(gamma, omega)`.
    pub fn transform(&self, alpha: f64, beta: f64) -> Result<(f64, f64)> {
        self.expect_in_domain(alpha)?;
        let s2 = self.sigma2();
        let gamma = s2 / (4.0 * s2 * alpha - 2.0 * self.lambda);
        let m = 2.0 * s2 / self.lambda;
        let omega = -beta + 0.5 * self.lambda * (-m * alpha).ln_1p();
        Ok((gamma, omega))
    }

    /// Conjugate back from the first marginal side: `(gamma, omega)` to the
    /// next `(alpha, beta)`.
    pub fn dual_transform(&self, gamma: f64, omega: f64) -> Result<(f64, f64)> {
        if !(gamma.is_finite() && 2.0 * gamma < self.lambda) {
            return Err(Error::InvalidRegime {
                reason: format!(
                    "conjugate coefficient {gamma} is outside the validity domain \
                     gamma < lambda / 2"
                ),
            });
        }
        let alpha = 1.0 / (4.0 * gamma - 2.0 * self.lambda);
        let beta = -omega + 0.5 * self.lambda * (-2.0 * gamma / self.lambda).ln_1p();
        Ok((alpha, beta))
    }

    /// Pack an `(alpha, beta)` pair with its transform.
    pub fn iterate(&self, t: usize, alpha: f64, beta: f64) -> Result<GaussianIterate> {
        let (gamma, omega) = self.transform(alpha, beta)?;
        Ok(GaussianIterate {
            t,
            alpha,
            beta,
            gamma,
            omega,
        })
    }

    /// One full step of the recursion.
    pub fn recursion_step(&self, it: &GaussianIterate) -> Result<GaussianIterate> {
        let (alpha, beta) = self.dual_transform(it.gamma, it.omega)?;
        self.iterate(it.t + 1, alpha, beta)
    }

    /// The composed map on quadratic coefficients,
    /// `alpha -> (2 sigma^2 alpha - lambda) / map_denominator(alpha)`.
    pub fn map(&self, alpha: f64) -> Result<f64> {
        self.expect_in_domain(alpha)?;
        Ok((2.0 * self.sigma2() * alpha - self.lambda) / self.map_denominator(alpha))
    }

    /// Derivative of the composed map,
    /// `4 sigma^4 / map_denominator(alpha)^2`.
    pub fn map_derivative(&self, alpha: f64) -> Result<f64> {
        self.expect_in_domain(alpha)?;
        let d = self.map_denominator(alpha);
        Ok(4.0 * self.sigma2() * self.sigma2() / (d * d))
    }

    /// The unique fixed point of the composed map,
    /// `(lambda - sqrt(4 sigma^2 + lambda^2)) / (4 sigma^2)`; always
    /// negative.
    pub fn fixed_point_alpha(&self) -> f64 {
        (self.lambda - self.sqrt_s()) / (4.0 * self.sigma2())
    }

    /// `1 - (2 sigma^2 / lambda) alpha_star`, in the cancellation-free form
    /// `(lambda + sqrt(4 sigma^2 + lambda^2)) / (2 lambda)`; always above
    /// one.
    pub fn p_star(&self) -> f64 {
        (self.lambda + self.sqrt_s()) / (2.0 * self.lambda)
    }

    /// Contraction factor of the map at its fixed point. The squared value
    /// from [`limiting_delta_ratio`](Self::limiting_delta_ratio) predicts
    /// the asymptotic gap ratio.
    pub fn limiting_ratio(&self) -> f64 {
        let d = self.map_denominator(self.fixed_point_alpha());
        4.0 * self.sigma2() * self.sigma2() / (d * d)
    }

    /// Asymptotic ratio of consecutive optimality gaps: the square of the
    /// limiting coefficient ratio.
    pub fn limiting_delta_ratio(&self) -> f64 {
        let r = self.limiting_ratio();
        r * r
    }

    /// Semi-dual value of the quadratic potential `alpha y^2` (the constant
    /// term never enters):
    /// `sigma^2 alpha + (lambda/2) ln(1 - m alpha)
    ///  - (sigma^2/(2 lambda)) / (1 - m alpha)`
    /// with `m = 2 sigma^2 / lambda`.
    pub fn semidual_value(&self, alpha: f64) -> Result<f64> {
        self.expect_in_domain(alpha)?;
        let s2 = self.sigma2();
        let m = 2.0 * s2 / self.lambda;
        let q = 1.0 - m * alpha;
        Ok(s2 * alpha + 0.5 * self.lambda * (-m * alpha).ln_1p() - s2 / (2.0 * self.lambda * q))
    }

    /// The optimal semi-dual value,
    /// `(lambda/2) ln p_star + (lambda - sqrt(4 sigma^2 + lambda^2)) / 2`.
    pub fn optimal_value(&self) -> f64 {
        0.5 * self.lambda * self.p_star().ln() + 0.5 * (self.lambda - self.sqrt_s())
    }

    /// Second derivative of the semi-dual value at the fixed point; always
    /// negative.
    pub fn curvature_at_fixed_point(&self) -> f64 {
        let s2 = self.sigma2();
        let m = 2.0 * s2 / self.lambda;
        let p = self.p_star();
        -(0.5 * self.lambda * m * m) / (p * p) - (s2 * m * m / self.lambda) / (p * p * p)
    }

    /// One step of the recursion centered at the fixed point:
    /// `d -> d * 4 sigma^4 / (map_denominator(alpha_star + d)
    ///  * map_denominator(alpha_star))`,
    /// which is the exact linear-fractional difference (no cancellation).
    pub fn centered_step(&self, d: f64) -> f64 {
        let s2 = self.sigma2();
        let d_star = self.map_denominator(self.fixed_point_alpha());
        let d_at = d_star - 4.0 * self.lambda * s2 * d;
        d * 4.0 * s2 * s2 / (d_at * d_star)
    }

    /// Optimality gap of the iterate `alpha_star + d`, evaluated after
    /// cancelling the stationary linear part in exact algebra:
    ///
    /// ```text
    /// gap(d) = (lambda/2) [-ln(1 - u) - u]
    ///        + (sigma^4 m / lambda^2) d^2 / (p^2 q)
    /// u = m d / p,  p = 1 - m alpha_star,  q = p - m d,
    /// m = 2 sigma^2 / lambda
    /// ```
    ///
    /// Both terms are nonnegative, so positivity survives floating point at
    /// any scale of `d`.
    pub fn gap_from_center(&self, d: f64) -> Result<f64> {
        let s2 = self.sigma2();
        let m = 2.0 * s2 / self.lambda;
        let p = self.p_star();
        let q = p - m * d;
        if !(q > 0.0) {
            return Err(Error::InvalidRegime {
                reason: format!("offset {d} leaves the validity domain"),
            });
        }
        let u = m * d / p;
        let bend = 0.5 * self.lambda * ln_one_minus_residual(u);
        let tail = (s2 * s2 * m / (self.lambda * self.lambda)) * d * d / (p * p * q);
        Ok(bend + tail)
    }

    /// The centered series started from `alpha_0 = 0` (so `d_0 =
    /// -alpha_star`), through `t_max` inclusive.
    pub fn centered_series(&self, t_max: usize) -> Result<Vec<CenteredPoint>> {
        let alpha_star = self.fixed_point_alpha();
        let mut d = -alpha_star;
        let mut out = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            out.push(CenteredPoint {
                t,
                d,
                alpha: alpha_star + d,
                delta: self.gap_from_center(d)?,
            });
            d = self.centered_step(d);
        }
        Ok(out)
    }

    /// Gap sequence `delta_t` for `t = 0..=t_max`, starting from the zero
    /// potential.
    pub fn delta_series(&self, t_max: usize) -> Result<Vec<f64>> {
        if t_max < 1 {
            return Err(Error::InvalidParam {
                name: "t_max",
                reason: "series length must be at least one step".into(),
            });
        }
        Ok(self
            .centered_series(t_max)?
            .into_iter()
            .map(|p| p.delta)
            .collect())
    }

    /// The raw iterate series from `alpha_0 = beta_0 = 0`, through `t_max`
    /// inclusive.
    pub fn iterate_series(&self, t_max: usize) -> Result<Vec<GaussianIterate>> {
        let mut it = self.iterate(0, 0.0, 0.0)?;
        let mut out = Vec::with_capacity(t_max + 1);
        out.push(it);
        for _ in 0..t_max {
            it = self.recursion_step(&it)?;
            out.push(it);
        }
        Ok(out)
    }

    /// Certified gap lower bounds at step `t`, valid for
    /// `lambda <= sigma/5`: the simple envelope `(sigma/20)(1 - 5
    /// lambda/sigma)^t` and the sharper
    /// `(2 sigma^6/(sigma+lambda)^3)(1 - 4 lambda/sigma
    ///  - 4 lambda^2/sigma^2)^t alpha_star^2`.
    pub fn gap_lower_bound_pair(&self, t: usize) -> Result<(f64, f64)> {
        self.expect_certificate_regime()?;
        let s = self.sigma;
        let l = self.lambda;
        let simple = (s / 20.0) * (1.0 - 5.0 * l / s).powi(t as i32);
        let a_star = self.fixed_point_alpha();
        let base = 1.0 - 4.0 * l / s - 4.0 * l * l / (s * s);
        let prefactor = 2.0 * s.powi(6) / ((s + l) * (s + l) * (s + l));
        let sharp = prefactor * base.powi(t as i32) * a_star * a_star;
        Ok((simple, sharp))
    }

    /// The best certified gap lower bound at step `t` (the larger of the
    /// pair); requires `lambda <= sigma/5`.
    pub fn gap_lower_bound(&self, t: usize) -> Result<f64> {
        let (simple, sharp) = self.gap_lower_bound_pair(t)?;
        Ok(simple.max(sharp))
    }

    /// Certified lower bound on the coefficient offset,
    /// `alpha_t - alpha_star >= (1 - 2 lambda/sigma
    ///  - 2 lambda^2/sigma^2)^t (-alpha_star)`; requires
    /// `lambda <= sigma/5`.
    pub fn alpha_offset_lower_bound(&self, t: usize) -> Result<f64> {
        self.expect_certificate_regime()?;
        let s = self.sigma;
        let l = self.lambda;
        let base = 1.0 - 2.0 * l / s - 2.0 * l * l / (s * s);
        Ok(base.powi(t as i32) * (-self.fixed_point_alpha()))
    }

    /// Values of the optimal potential `alpha_star y^2` on given abscissas.
    pub fn fixed_point_potential(&self, ys: &[f64]) -> Vec<f64> {
        let a = self.fixed_point_alpha();
        ys.iter().map(|y| a * y * y).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_problem() -> GaussianProblem {
        GaussianProblem::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn first_step_from_zero_matches_hand_values() {
        let g = reference_problem();
        let it0 = g.iterate(0, 0.0, 0.0).unwrap();
        assert_eq!(it0.gamma, -1.0); // sigma^2 / (-2 lambda) = 1 / -1
        assert_eq!(it0.omega, 0.0);
        let it1 = g.recursion_step(&it0).unwrap();
        assert!((it1.alpha + 0.2).abs() < 1e-15);
        // beta_1 = (lambda/2) ln(1 + sigma^2/lambda^2)
        let beta1 = 0.25 * (1.0f64 + 1.0 / 0.25).ln();
        assert!((it1.beta - beta1).abs() < 1e-15);
        // Generic first step: alpha_1 = -lambda / (2 sigma^2 + 2 lambda^2);
        // here sigma = 2 gives sigma^2 = 4.
        let g2 = GaussianProblem::new(2.0, 0.3).unwrap();
        let s1 = g2
            .recursion_step(&g2.iterate(0, 0.0, 0.0).unwrap())
            .unwrap();
        assert!((s1.alpha + 0.3 / (8.0 + 0.18)).abs() < 1e-15);
    }

    #[test]
    fn semidual_value_matches_hand_value_at_zero() {
        let g = reference_problem();
        // sigma^2/(4 sigma^2 * 0 - 2 lambda) = 1/(-1), so E(0) = -1.
        assert!((g.semidual_value(0.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_is_stationary_attracting_and_optimal() {
        for (s, l) in [(1.0, 0.5), (2.0, 0.1), (0.5, 1.5), (1.0, 0.01)] {
            let g = GaussianProblem::new(s, l).unwrap();
            let a = g.fixed_point_alpha();
            assert!(a < 0.0);
            assert!(g.in_domain(a));
            assert!((g.map(a).unwrap() - a).abs() < 1e-14 * (1.0 + a.abs()));
            let r = g.limiting_ratio();
            assert!(r > 0.0 && r < 1.0, "ratio {r} not contracting");
            assert!((g.map_derivative(a).unwrap() - r).abs() < 1e-15);
            assert!((g.limiting_delta_ratio() - r * r).abs() < 1e-15);
            assert!(g.curvature_at_fixed_point() < 0.0);
            // Values slightly off the fixed point are worse.
            let e_star = g.semidual_value(a).unwrap();
            for eps in [-1e-3, 1e-3] {
                assert!(g.semidual_value(a + eps).unwrap() < e_star);
            }
        }
    }

    #[test]
    fn optimal_value_agrees_between_closed_form_and_generic_formula() {
        for (s, l) in [(1.0, 0.5), (3.0, 0.2), (0.25, 2.0)] {
            let g = GaussianProblem::new(s, l).unwrap();
            let direct = g.optimal_value();
            let via_e = g.semidual_value(g.fixed_point_alpha()).unwrap();
            assert!(
                (direct - via_e).abs() < 1e-13 * (1.0 + direct.abs()),
                "closed form {direct} vs generic {via_e}"
            );
        }
        // Pinned decimals for the reference parameters.
        let g = reference_problem();
        assert!((g.optimal_value() + 0.545623).abs() < 2e-6);
        assert!((g.fixed_point_alpha() + 0.390388).abs() < 1e-6);
        assert!((g.limiting_ratio() - 0.371628).abs() < 1e-5);
    }

    #[test]
    fn centered_gap_matches_direct_difference_at_moderate_offsets() {
        let g = reference_problem();
        let e_star = g.optimal_value();
        for d in [0.39, 0.1, 1e-2, 1e-4, -0.05, -1e-3] {
            let direct = e_star - g.semidual_value(g.fixed_point_alpha() + d).unwrap();
            let stable = g.gap_from_center(d).unwrap();
            assert!(
                (direct - stable).abs() < 1e-11 * (1.0 + stable.abs()),
                "d={d}: direct {direct} vs stable {stable}"
            );
            assert!(stable > 0.0);
        }
        // Initial gap from alpha_0 = 0.
        let d0 = -g.fixed_point_alpha();
        assert!((g.gap_from_center(d0).unwrap() - 0.454377).abs() < 2e-6);
    }

    #[test]
    fn centered_gap_is_positive_and_quadratic_at_tiny_offsets() {
        let g = reference_problem();
        let half_curvature = -0.5 * g.curvature_at_fixed_point();
        for d in [1e-8, -1e-8, 1e-15, 1e-30, -1e-60, 1e-120] {
            let gap = g.gap_from_center(d).unwrap();
            assert!(gap > 0.0, "gap not positive at d={d}");
            let model = half_curvature * d * d;
            assert!(
                (gap - model).abs() < 1e-6 * model,
                "d={d}: gap {gap} vs quadratic model {model}"
            );
        }
    }

    #[test]
    fn centered_series_matches_raw_iteration_while_it_is_well_conditioned() {
        let g = reference_problem();
        let raw = g.iterate_series(30).unwrap();
        let centered = g.centered_series(30).unwrap();
        let a_star = g.fixed_point_alpha();
        for (r, c) in raw.iter().zip(centered.iter()) {
            assert!(
                (r.alpha - c.alpha).abs() < 1e-12,
                "t={}: raw {} centered {}",
                r.t,
                r.alpha,
                c.alpha
            );
            assert!((r.alpha - (a_star + c.d)).abs() < 1e-12);
        }
        // The gap series is the centered deltas.
        let deltas = g.delta_series(30).unwrap();
        assert_eq!(deltas.len(), 31);
        for (c, d) in centered.iter().zip(deltas.iter()) {
            assert_eq!(c.delta, *d);
        }
        assert!(g.delta_series(0).is_err());
    }

    #[test]
    fn centered_series_contracts_at_the_limiting_ratio() {
        let g = reference_problem();
        let series = g.centered_series(220).unwrap();
        let r_star = g.limiting_ratio();
        for w in series.windows(2) {
            assert!(w[1].d > 0.0 && w[1].d < w[0].d);
            assert!(w[1].delta > 0.0 && w[1].delta < w[0].delta);
        }
        // Late-series ratios of offsets approach the map derivative, and
        // ratios of gaps approach its square.
        let tail = &series[180..];
        for w in tail.windows(2) {
            assert!((w[1].d / w[0].d - r_star).abs() < 1e-10);
            assert!((w[1].delta / w[0].delta - g.limiting_delta_ratio()).abs() < 1e-8);
        }
        // The gap survives two hundred contractions without flushing to zero.
        assert!(series[200].delta > 0.0);
        assert!(series[200].delta < 1e-35);
    }

    #[test]
    fn lower_bound_certificates_hold_along_the_series() {
        let g = GaussianProblem::new(1.0, 0.1).unwrap();
        let series = g.centered_series(200).unwrap();
        for p in &series {
            let (simple, sharp) = g.gap_lower_bound_pair(p.t).unwrap();
            assert!(
                p.delta >= simple - 1e-12,
                "t={}: delta {} below simple bound {}",
                p.t,
                p.delta,
                simple
            );
            assert!(
                p.delta >= sharp - 1e-12,
                "t={}: delta {} below sharp bound {}",
                p.t,
                p.delta,
                sharp
            );
            assert!(g.gap_lower_bound(p.t).unwrap() >= simple.max(sharp) - 0.0);
            let offset_bound = g.alpha_offset_lower_bound(p.t).unwrap();
            assert!(
                p.d >= offset_bound - 1e-12,
                "t={}: offset {} below bound {}",
                p.t,
                p.d,
                offset_bound
            );
        }
        // Certificates are gated on the small-regularization regime.
        let big = reference_problem();
        assert!(big.gap_lower_bound_pair(3).is_err());
        assert!(big.alpha_offset_lower_bound(3).is_err());
        // At the regime edge the simple bound degenerates gracefully.
        let edge = GaussianProblem::new(1.0, 0.2).unwrap();
        let (simple, sharp) = edge.gap_lower_bound_pair(1).unwrap();
        assert_eq!(simple, 0.0);
        assert!(sharp > 0.0);
    }

    #[test]
    fn recursion_rejects_out_of_domain_coefficients() {
        let g = reference_problem();
        let bad = g.lambda() / (2.0 * g.sigma2()) + 0.1;
        assert!(matches!(g.map(bad), Err(Error::InvalidRegime { .. })));
        assert!(g.semidual_value(bad).is_err());
        assert!(g.gap_from_center(10.0).is_err());
        assert!(GaussianProblem::new(0.0, 0.5).is_err());
        assert!(GaussianProblem::new(1.0, -1.0).is_err());
    }

    #[test]
    fn residual_helper_is_accurate_across_scales() {
        // Compare against direct evaluation where it is well conditioned.
        for u in [0.6, 0.3, 0.01, 1e-3, 2e-4] {
            let direct = -(1.0f64 - u).ln() - u;
            let stable = ln_one_minus_residual(u);
            assert!((direct - stable).abs() < 1e-12 * (1.0 + direct.abs()));
        }
        // Series regime: matches the quadratic leading term.
        for u in [1e-5, 1e-9, -1e-7, 1e-30] {
            let stable = ln_one_minus_residual(u);
            assert!((stable - 0.5 * u * u).abs() <= 0.4 * u.abs() * u * u + f64::EPSILON * stable);
            assert!(stable >= 0.0);
        }
    }
}
