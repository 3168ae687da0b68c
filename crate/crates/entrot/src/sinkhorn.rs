//! Log-domain Sinkhorn iteration on the semi-dual potential.
//!
//! For a problem with marginals `mu`, `nu`, cost matrix `c`, and
//! regularization `lambda > 0`, the soft conjugate of a potential `psi` on
//! the second support is
//!
//! ```text
//! T(psi)(x_i) = -lambda * log sum_j nu_j exp((psi_j - c_ij) / lambda)
//! ```
//!
//! computed with a max shift so only differences of like-scaled quantities
//! are exponentiated. One Sinkhorn step is the double transform
//! `psi -> T'(T(psi))` (the dual-direction transform `T'` runs over the first
//! support); the semi-dual value `E(psi) = <T(psi), mu> + <psi, nu>` never
//! decreases along steps, and the per-step improvement equals
//! `lambda * KL(nu | nu[psi])` where `nu[psi]` is the second marginal of the
//! induced coupling.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::num;
use crate::tol;

/// Which support a potential lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    OnX,
    OnY,
}

/// Whether a potential has been recentered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    /// Mean zero under the measure on its side.
    MeanZero,
}

/// A dual potential: one value per support point of one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    values: Vec<f64>,
    side: Side,
    normalization: Normalization,
}

impl Potential {
    pub fn new(values: Vec<f64>, side: Side) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "potential values" });
        }
        Ok(Potential {
            values,
            side,
            normalization: Normalization::Raw,
        })
    }

    pub fn on_x(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Side::OnX)
    }

    pub fn on_y(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Side::OnY)
    }

    pub fn zeros(side: Side, n: usize) -> Self {
        Potential {
            values: vec![0.0; n],
            side,
            normalization: Normalization::Raw,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Add a constant to every value.
    pub fn shifted(&self, a: f64) -> Potential {
        Potential {
            values: self.values.iter().map(|v| v + a).collect(),
            side: self.side,
            normalization: Normalization::Raw,
        }
    }

    /// `self + s * v` entrywise.
    pub fn plus_scaled(&self, v: &[f64], s: f64) -> Result<Potential> {
        if v.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                what: "direction",
                expected: self.values.len(),
                got: v.len(),
            });
        }
        Potential::new(
            self.values
                .iter()
                .zip(v.iter())
                .map(|(a, b)| a + s * b)
                .collect(),
            self.side,
        )
    }

    /// Recenter so the mean under `m` is zero.
    pub fn mean_zero_under(&self, m: &DiscreteMeasure) -> Result<Potential> {
        if m.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                what: "measure for recentering",
                expected: self.values.len(),
                got: m.len(),
            });
        }
        let mean = num::weighted_mean(m.weights(), &self.values);
        Ok(Potential {
            values: self.values.iter().map(|v| v - mean).collect(),
            side: self.side,
            normalization: Normalization::MeanZero,
        })
    }
}

/// The lambda-free part of a problem: marginals plus cost, cheaply cloneable.
#[derive(Debug, Clone)]
pub struct Instance {
    mu: Arc<DiscreteMeasure>,
    nu: Arc<DiscreteMeasure>,
    cost: Arc<CostModel>,
}

impl Instance {
    pub fn new(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostModel) -> Result<Self> {
        if cost.n_x() != mu.len() {
            return Err(Error::LengthMismatch {
                what: "cost rows",
                expected: mu.len(),
                got: cost.n_x(),
            });
        }
        if cost.n_y() != nu.len() {
            return Err(Error::LengthMismatch {
                what: "cost columns",
                expected: nu.len(),
                got: cost.n_y(),
            });
        }
        Ok(Instance {
            mu: Arc::new(mu),
            nu: Arc::new(nu),
            cost: Arc::new(cost),
        })
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    /// Oscillation of the cost entries.
    pub fn c_osc(&self) -> f64 {
        self.cost.meta().c_osc
    }

    /// Attach a regularization strength.
    pub fn problem(&self, lambda: f64) -> Result<Problem> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParam {
                name: "lambda",
                reason: format!("must be finite and positive, got {lambda}"),
            });
        }
        Ok(Problem {
            inst: self.clone(),
            lambda,
        })
    }
}

/// An entropically regularized transport problem.
#[derive(Debug, Clone)]
pub struct Problem {
    inst: Instance,
    lambda: f64,
}

/// Conditional distributions over the second support, one row per first
/// support point; rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFamily {
    n_x: usize,
    n_y: usize,
    probs: Vec<f64>,
}

impl ConditionalFamily {
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_y..(i + 1) * self.n_y]
    }

    /// Mean of `f` under row `i`.
    pub fn row_expectation(&self, i: usize, f: &[f64]) -> f64 {
        num::weighted_mean(self.row(i), f)
    }

    /// Variance of `f` under row `i`.
    pub fn row_variance(&self, i: usize, f: &[f64]) -> f64 {
        num::weighted_variance(self.row(i), f)
    }

    /// Mixture of the rows under the given weights on the first support.
    pub fn mix(&self, mu_weights: &[f64]) -> Vec<f64> {
        debug_assert_eq!(mu_weights.len(), self.n_x);
        let mut out = vec![0.0; self.n_y];
        for i in 0..self.n_x {
            let w = mu_weights[i];
            let row = self.row(i);
            for j in 0..self.n_y {
                out[j] += w * row[j];
            }
        }
        out
    }
}

/// A coupling of `mu` and `nu`, stored densely row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    n_x: usize,
    n_y: usize,
    gamma: Vec<f64>,
}

impl Plan {
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.n_y..(i + 1) * self.n_y]
    }

    pub fn entries(&self) -> &[f64] {
        &self.gamma
    }

    pub fn total_mass(&self) -> f64 {
        self.gamma.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_y];
        for i in 0..self.n_x {
            let row = self.row(i);
            for j in 0..self.n_y {
                out[j] += row[j];
            }
        }
        out
    }
}

/// One Sinkhorn step: the intermediate transform on the first support and
/// the next potential on the second support.
#[derive(Debug, Clone)]
pub struct SinkhornStep {
    pub phi_half: Potential,
    pub psi_next: Potential,
}

/// Per-iteration record of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub lambda: f64,
    /// Semi-dual value of the iterate.
    pub e: f64,
    /// Gap to the reference value, clamped at zero.
    pub delta: f64,
    /// Divergence of the target marginal from the iterate's second marginal.
    pub kl: f64,
    /// Variance (under `nu`) of the difference to the reference potential.
    pub var_gap: f64,
    /// Oscillation of the difference to the reference potential.
    pub osc_gap: f64,
}

/// Full solve record: per-iteration rows plus the final (reference) iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkhornTrace {
    pub rows: Vec<TraceRow>,
    /// Final iterate, recentered to mean zero under `nu`.
    pub psi_ref: Potential,
    /// Semi-dual value of the final iterate.
    pub e_ref: f64,
    /// `lambda * kl` at the stopping iterate.
    pub residual: f64,
    pub converged: bool,
    /// Number of double transforms applied.
    pub iters: usize,
    pub lambda: f64,
}

impl SinkhornTrace {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }
}

/// Lean solve result used for reference optima (no per-step records).
#[derive(Debug, Clone)]
pub struct ReferenceSolve {
    /// Final iterate, mean zero under `nu`.
    pub psi: Potential,
    /// Semi-dual value of the final iterate.
    pub e: f64,
    /// Marginal divergence at the stopping iterate.
    pub kl: f64,
    /// `lambda * kl` at the stopping iterate.
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
}

impl Problem {
    pub fn new(
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        cost: CostModel,
        lambda: f64,
    ) -> Result<Self> {
        Instance::new(mu, nu, cost)?.problem(lambda)
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        self.inst.mu()
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        self.inst.nu()
    }

    pub fn cost(&self) -> &CostModel {
        self.inst.cost()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same instance with a different regularization strength.
    pub fn with_lambda(&self, lambda: f64) -> Result<Problem> {
        self.inst.problem(lambda)
    }

    fn expect_on_y(&self, psi: &Potential) -> Result<()> {
        if psi.side() != Side::OnY {
            return Err(Error::WrongSide { expected: "on_y" });
        }
        if psi.len() != self.inst.nu.len() {
            return Err(Error::LengthMismatch {
                what: "potential on the second support",
                expected: self.inst.nu.len(),
                got: psi.len(),
            });
        }
        Ok(())
    }

    fn expect_on_x(&self, phi: &Potential) -> Result<()> {
        if phi.side() != Side::OnX {
            return Err(Error::WrongSide { expected: "on_x" });
        }
        if phi.len() != self.inst.mu.len() {
            return Err(Error::LengthMismatch {
                what: "potential on the first support",
                expected: self.inst.mu.len(),
                got: phi.len(),
            });
        }
        Ok(())
    }

    fn c_transform_values(&self, psi: &[f64], lambda: f64) -> Vec<f64> {
        let lw = num::ln_weights(self.inst.nu.weights());
        let cost = self.inst.cost();
        let n_y = cost.n_y();
        num::map_rows(cost.n_x(), n_y, |i| {
            let row = cost.row(i);
            let lse = num::logsumexp_by(n_y, |j| (psi[j] - row[j]) / lambda + lw[j]);
            -lambda * lse
        })
    }

    fn c_transform_dual_values(&self, phi: &[f64], lambda: f64) -> Vec<f64> {
        let lw = num::ln_weights(self.inst.mu.weights());
        let cost = self.inst.cost();
        let (n_x, n_y) = (cost.n_x(), cost.n_y());
        let entries = cost.entries();
        num::map_rows(n_y, n_x, |j| {
            let lse =
                num::logsumexp_by(n_x, |i| (phi[i] - entries[i * n_y + j]) / lambda + lw[i]);
            -lambda * lse
        })
    }

    /// Soft conjugate of a potential on the second support, producing a
    /// potential on the first support.
    pub fn c_transform(&self, psi: &Potential) -> Result<Potential> {
        self.expect_on_y(psi)?;
        Potential::on_x(self.c_transform_values(psi.values(), self.lambda))
    }

    /// Soft conjugate in the other direction (first support to second).
    pub fn c_transform_dual(&self, phi: &Potential) -> Result<Potential> {
        self.expect_on_x(phi)?;
        Potential::on_y(self.c_transform_dual_values(phi.values(), self.lambda))
    }

    /// One full Sinkhorn update of `psi`.
    pub fn double_transform(&self, psi: &Potential) -> Result<Potential> {
        self.expect_on_y(psi)?;
        let phi = self.c_transform_values(psi.values(), self.lambda);
        Potential::on_y(self.c_transform_dual_values(&phi, self.lambda))
    }

    /// Zero-regularization conjugate: exact minimum of `c(x, .) - psi` over
    /// the positive-mass points of `nu`; ties keep the first index.
    pub fn hard_c_transform(&self, psi: &Potential) -> Result<Potential> {
        self.expect_on_y(psi)?;
        let nu_w = self.inst.nu.weights();
        let cost = self.inst.cost();
        let psi = psi.values();
        let values = num::map_rows(cost.n_x(), cost.n_y(), |i| {
            let row = cost.row(i);
            let mut best = f64::INFINITY;
            for j in 0..row.len() {
                if nu_w[j] > 0.0 {
                    let v = row[j] - psi[j];
                    if v < best {
                        best = v;
                    }
                }
            }
            best
        });
        Potential::on_x(values)
    }

    /// Semi-dual value `E(psi) = <T(psi), mu> + <psi, nu>` at this problem's
    /// regularization.
    pub fn semi_dual(&self, psi: &Potential) -> Result<f64> {
        self.semi_dual_with(psi, None)
    }

    /// Semi-dual value at an overridden regularization; an override of zero
    /// uses the hard conjugate.
    pub fn semi_dual_with(&self, psi: &Potential, lambda_override: Option<f64>) -> Result<f64> {
        self.expect_on_y(psi)?;
        let mu_w = self.inst.mu.weights();
        let nu_w = self.inst.nu.weights();
        let phi = match lambda_override {
            None => self.c_transform_values(psi.values(), self.lambda),
            Some(l) if l == 0.0 => self.hard_c_transform(psi)?.values().to_vec(),
            Some(l) if l.is_finite() && l > 0.0 => self.c_transform_values(psi.values(), l),
            Some(l) => {
                return Err(Error::InvalidParam {
                    name: "lambda_override",
                    reason: format!("must be zero or positive and finite, got {l}"),
                })
            }
        };
        Ok(num::dot(&phi, mu_w) + num::dot(psi.values(), nu_w))
    }

    /// The transform part of the semi-dual, `<T(psi), mu>`.
    pub fn k_value(&self, psi: &Potential) -> Result<f64> {
        self.expect_on_y(psi)?;
        let phi = self.c_transform_values(psi.values(), self.lambda);
        Ok(num::dot(&phi, self.inst.mu.weights()))
    }

    /// Total exponential mass `sum_ij mu_i nu_j exp((phi_i + psi_j - c_ij)/lambda)`,
    /// computed with one global max shift.
    pub fn exponential_mass(&self, phi: &Potential, psi: &Potential) -> Result<f64> {
        self.expect_on_x(phi)?;
        self.expect_on_y(psi)?;
        let cost = self.inst.cost();
        let (n_x, n_y) = (cost.n_x(), cost.n_y());
        let lwx = num::ln_weights(self.inst.mu.weights());
        let lwy = num::ln_weights(self.inst.nu.weights());
        let phi = phi.values();
        let psi = psi.values();
        let lambda = self.lambda;
        let term = |k: usize| {
            let (i, j) = (k / n_y, k % n_y);
            (phi[i] + psi[j] - cost.at(i, j)) / lambda + lwx[i] + lwy[j]
        };
        let lse = num::logsumexp_by(n_x * n_y, term);
        Ok(lse.exp())
    }

    /// Full dual value `<phi, mu> + <psi, nu> + lambda (1 - mass)`.
    pub fn dual_value(&self, phi: &Potential, psi: &Potential) -> Result<f64> {
        let mass = self.exponential_mass(phi, psi)?;
        Ok(num::dot(phi.values(), self.inst.mu.weights())
            + num::dot(psi.values(), self.inst.nu.weights())
            + self.lambda * (1.0 - mass))
    }

    /// Conditional distributions of the induced coupling given each first
    /// support point.
    pub fn conditionals(&self, psi: &Potential) -> Result<ConditionalFamily> {
        self.expect_on_y(psi)?;
        let lw = num::ln_weights(self.inst.nu.weights());
        let cost = self.inst.cost();
        let (n_x, n_y) = (cost.n_x(), cost.n_y());
        let psi = psi.values();
        let lambda = self.lambda;
        let probs = num::fill_rows(n_x, n_y, |i, out| {
            let row = cost.row(i);
            let mut m = f64::NEG_INFINITY;
            for j in 0..n_y {
                let t = (psi[j] - row[j]) / lambda + lw[j];
                out[j] = t;
                if t > m {
                    m = t;
                }
            }
            let mut s = 0.0;
            for slot in out.iter_mut() {
                let e = (*slot - m).exp();
                *slot = e;
                s += e;
            }
            let inv = 1.0 / s;
            for slot in out.iter_mut() {
                *slot *= inv;
            }
        });
        Ok(ConditionalFamily { n_x, n_y, probs })
    }

    /// The induced coupling `gamma[psi]` with first marginal `mu`.
    pub fn plan(&self, psi: &Potential) -> Result<Plan> {
        let fam = self.conditionals(psi)?;
        let mu_w = self.inst.mu.weights();
        let mut gamma = fam.probs;
        for (i, chunk) in gamma.chunks_mut(fam.n_y).enumerate() {
            let w = mu_w[i];
            for v in chunk.iter_mut() {
                *v *= w;
            }
        }
        Ok(Plan {
            n_x: fam.n_x,
            n_y: fam.n_y,
            gamma,
        })
    }

    /// Second marginal `nu[psi]` of the induced coupling (mixture of the
    /// conditional rows under `mu`), returned with the conditional family.
    pub fn second_marginal(&self, psi: &Potential) -> Result<(DiscreteMeasure, ConditionalFamily)> {
        let fam = self.conditionals(psi)?;
        let weights = fam.mix(self.inst.mu.weights());
        let marginal = DiscreteMeasure::new(self.inst.nu.points_vec(), weights)?;
        Ok((marginal, fam))
    }

    /// Second-marginal weights only.
    pub fn marginal_weights(&self, psi: &Potential) -> Result<Vec<f64>> {
        let fam = self.conditionals(psi)?;
        Ok(fam.mix(self.inst.mu.weights()))
    }

    /// `(1/lambda) <T'(T(psi)) - psi, nu>`, the divergence of `nu` from the
    /// iterate's second marginal expressed through transforms alone.
    pub fn kl_nu_gap(&self, psi: &Potential) -> Result<f64> {
        self.expect_on_y(psi)?;
        let phi = self.c_transform_values(psi.values(), self.lambda);
        let dd = self.c_transform_dual_values(&phi, self.lambda);
        let nu_w = self.inst.nu.weights();
        let mut s = 0.0;
        for j in 0..dd.len() {
            s += nu_w[j] * (dd[j] - psi.values()[j]);
        }
        Ok(s / self.lambda)
    }

    /// One Sinkhorn step, returning the intermediate transform and the next
    /// iterate.
    pub fn step(&self, psi: &Potential) -> Result<SinkhornStep> {
        self.expect_on_y(psi)?;
        let phi = self.c_transform_values(psi.values(), self.lambda);
        let next = self.c_transform_dual_values(&phi, self.lambda);
        Ok(SinkhornStep {
            phi_half: Potential::on_x(phi)?,
            psi_next: Potential::on_y(next)?,
        })
    }

    /// Divergence `KL(gamma[psi_a] | gamma[psi_b])` between induced couplings,
    /// evaluated through potentials (no logs of small numbers).
    pub fn plan_kl(&self, psi_a: &Potential, psi_b: &Potential) -> Result<f64> {
        self.expect_on_y(psi_a)?;
        self.expect_on_y(psi_b)?;
        let phi_a = self.c_transform_values(psi_a.values(), self.lambda);
        let phi_b = self.c_transform_values(psi_b.values(), self.lambda);
        let mw = self.marginal_weights(psi_a)?;
        let mu_w = self.inst.mu.weights();
        let mut s = 0.0;
        for i in 0..phi_a.len() {
            s += mu_w[i] * (phi_a[i] - phi_b[i]);
        }
        for j in 0..mw.len() {
            s += mw[j] * (psi_a.values()[j] - psi_b.values()[j]);
        }
        Ok(s / self.lambda)
    }

    /// Divergence of the induced coupling from the product `mu (x) nu`.
    pub fn plan_product_kl(&self, psi: &Potential) -> Result<f64> {
        self.expect_on_y(psi)?;
        let phi = self.c_transform_values(psi.values(), self.lambda);
        let fam = self.conditionals(psi)?;
        let mu_w = self.inst.mu.weights();
        let cost = self.inst.cost();
        let psi_v = psi.values();
        let mut s = 0.0;
        for i in 0..fam.n_x() {
            let row = fam.row(i);
            let crow = cost.row(i);
            let mut acc = 0.0;
            for j in 0..fam.n_y() {
                acc += row[j] * (phi[i] + psi_v[j] - crow[j]);
            }
            s += mu_w[i] * acc;
        }
        Ok((s / self.lambda).max(0.0))
    }

    /// `<c, gamma[psi]>`.
    pub fn transport_cost(&self, psi: &Potential) -> Result<f64> {
        let fam = self.conditionals(psi)?;
        let mu_w = self.inst.mu.weights();
        let cost = self.inst.cost();
        let mut s = 0.0;
        for i in 0..fam.n_x() {
            let row = fam.row(i);
            let crow = cost.row(i);
            let mut acc = 0.0;
            for j in 0..fam.n_y() {
                acc += row[j] * crow[j];
            }
            s += mu_w[i] * acc;
        }
        Ok(s)
    }

    /// Directional derivatives of `K(psi) = <T(psi), mu>` along `v`,
    /// evaluated at `psi + eps v`: the first derivative is
    /// `-<v, nu[psi + eps v]>` and the second is
    /// `-(1/lambda) E_mu Var_{row}(v)`, always nonpositive.
    pub fn k_directional_derivatives(
        &self,
        psi: &Potential,
        v: &[f64],
        eps: f64,
    ) -> Result<(f64, f64)> {
        self.expect_on_y(psi)?;
        let at = psi.plus_scaled(v, eps)?;
        let fam = self.conditionals(&at)?;
        let mu_w = self.inst.mu.weights();
        let mixed = fam.mix(mu_w);
        let first = -num::dot(v, &mixed);
        let mut acc = 0.0;
        for i in 0..fam.n_x() {
            acc += mu_w[i] * fam.row_variance(i, v);
        }
        let second = -acc / self.lambda;
        Ok((first, second))
    }

    /// Iterate from `psi0` until `lambda * kl <= tol` or `max_iters` double
    /// transforms, recording the semi-dual value and marginal divergence of
    /// every iterate; a second pass fills the gap, variance, and oscillation
    /// columns against the final iterate.
    pub fn solve(&self, psi0: &Potential, max_iters: usize, tol_stop: f64) -> Result<SinkhornTrace> {
        self.expect_on_y(psi0)?;
        if max_iters == 0 {
            return Err(Error::InvalidParam {
                name: "max_iters",
                reason: "need at least one iteration".into(),
            });
        }
        if !(tol_stop.is_finite() && tol_stop >= 0.0) {
            return Err(Error::InvalidParam {
                name: "tol",
                reason: format!("must be finite and nonnegative, got {tol_stop}"),
            });
        }
        let mu_w = self.inst.mu.weights();
        let nu_w = self.inst.nu.weights();

        let mut psi = psi0.values().to_vec();
        let mut e_kl: Vec<(f64, f64)> = Vec::new();
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..max_iters {
            let phi = self.c_transform_values(&psi, self.lambda);
            let e_t = num::dot(&phi, mu_w) + num::dot(&psi, nu_w);
            let next = self.c_transform_dual_values(&phi, self.lambda);
            let mut gap = 0.0;
            for j in 0..next.len() {
                gap += nu_w[j] * (next[j] - psi[j]);
            }
            let kl_t = (gap / self.lambda).max(0.0);
            e_kl.push((e_t, kl_t));
            residual = self.lambda * kl_t;
            psi = next;
            if residual <= tol_stop {
                converged = true;
                break;
            }
        }

        let phi_ref = self.c_transform_values(&psi, self.lambda);
        let e_ref = num::dot(&phi_ref, mu_w) + num::dot(&psi, nu_w);
        let psi_ref = Potential::on_y(psi)?.mean_zero_under(self.inst.nu())?;

        // Replay the iteration (bit-identical) to fill the comparison columns.
        let mut rows = Vec::with_capacity(e_kl.len());
        let mut replay = psi0.values().to_vec();
        let mut diff = vec![0.0; replay.len()];
        for (t, &(e_t, kl_t)) in e_kl.iter().enumerate() {
            for j in 0..replay.len() {
                diff[j] = psi_ref.values()[j] - replay[j];
            }
            rows.push(TraceRow {
                t,
                lambda: self.lambda,
                e: e_t,
                delta: (e_ref - e_t).max(0.0),
                kl: kl_t,
                var_gap: num::weighted_variance(nu_w, &diff),
                osc_gap: num::oscillation(&diff),
            });
            if t + 1 < e_kl.len() {
                let phi = self.c_transform_values(&replay, self.lambda);
                replay = self.c_transform_dual_values(&phi, self.lambda);
            }
        }

        Ok(SinkhornTrace {
            iters: rows.len(),
            rows,
            psi_ref,
            e_ref,
            residual,
            converged,
            lambda: self.lambda,
        })
    }

    /// Reference solve from zero with the crate-default stopping rule.
    pub fn solve_reference(&self) -> Result<ReferenceSolve> {
        let tol_stop = tol::REFERENCE_TOL_SCALE * 1.0_f64.max(self.inst.c_osc());
        let psi0 = Potential::zeros(Side::OnY, self.inst.nu.len());
        self.solve_reference_from(&psi0, tol::REFERENCE_MAX_ITERS, tol_stop)
    }

    /// Lean solve (no per-step records) from a given start.
    pub fn solve_reference_from(
        &self,
        psi0: &Potential,
        max_iters: usize,
        tol_stop: f64,
    ) -> Result<ReferenceSolve> {
        self.expect_on_y(psi0)?;
        let mu_w = self.inst.mu.weights();
        let nu_w = self.inst.nu.weights();
        let mut psi = psi0.values().to_vec();
        let mut kl_last = f64::INFINITY;
        let mut iters = 0usize;
        let mut converged = false;
        while iters < max_iters {
            let phi = self.c_transform_values(&psi, self.lambda);
            let next = self.c_transform_dual_values(&phi, self.lambda);
            let mut gap = 0.0;
            for j in 0..next.len() {
                gap += nu_w[j] * (next[j] - psi[j]);
            }
            kl_last = (gap / self.lambda).max(0.0);
            psi = next;
            iters += 1;
            if self.lambda * kl_last <= tol_stop {
                converged = true;
                break;
            }
        }
        let phi = self.c_transform_values(&psi, self.lambda);
        let e = num::dot(&phi, mu_w) + num::dot(&psi, nu_w);
        let psi = Potential::on_y(psi)?.mean_zero_under(self.inst.nu())?;
        Ok(ReferenceSolve {
            psi,
            e,
            kl: kl_last,
            residual: self.lambda * kl_last,
            iters,
            converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostKind, CostModel};
    use crate::measure::{self, DiscreteMeasure};
    use proptest::prelude::*;

    /// Uniform measures on {0, 1} with the bilinear cost and lambda = 1.
    fn two_point_problem() -> Problem {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let c = CostModel::build(CostKind::Linear, &m, &m).unwrap();
        Problem::new(m.clone(), m, c, 1.0).unwrap()
    }

    fn random_problem(seed: u64, n_x: usize, n_y: usize, lambda: f64) -> Problem {
        crate::synthetic::random_problem(seed, n_x, n_y, lambda, 1.0)
    }

    #[test]
    fn two_point_transform_matches_closed_forms() {
        let p = two_point_problem();
        let psi = Potential::zeros(Side::OnY, 2);
        let phi = p.c_transform(&psi).unwrap();
        let e = std::f64::consts::E;
        // -log sum_j 0.5 exp(-c_ij): row 0 gives -log(1) = 0, row 1 gives
        // -log((1 + e)/2).
        assert!((phi.values()[0] - 0.0).abs() < 1e-15);
        assert!((phi.values()[1] + ((1.0 + e) / 2.0).ln()).abs() < 1e-15);

        let value = p.semi_dual(&psi).unwrap();
        assert!((value - 0.5 * -(((1.0 + e) / 2.0).ln())).abs() < 1e-15);

        let dd = p.double_transform(&psi).unwrap();
        // -log(1/2 + 1/(1+e)) and -log(1/2 + e/(1+e)).
        let dd0 = -(0.5 + 1.0 / (1.0 + e)).ln();
        let dd1 = -(0.5 + e / (1.0 + e)).ln();
        assert!((dd.values()[0] - dd0).abs() < 1e-15);
        assert!((dd.values()[1] - dd1).abs() < 1e-15);

        let kl = p.kl_nu_gap(&psi).unwrap();
        assert!((kl - 0.5 * (dd0 + dd1)).abs() < 1e-15);
        assert!(kl >= -1e-12);

        // Decimal spot checks for the same quantities.
        assert!((phi.values()[1] + 0.620115).abs() < 1e-6);
        assert!((dd.values()[0] - 0.262740).abs() < 1e-6);
        assert!((dd.values()[1] + 0.207874).abs() < 1e-6);
        assert!((value + 0.310057).abs() < 1e-6);
        assert!((kl - 0.027433).abs() < 1e-6);
    }

    #[test]
    fn hard_transform_takes_exact_minima_with_first_index_ties() {
        let p = two_point_problem();
        let psi = Potential::zeros(Side::OnY, 2);
        let hard = p.hard_c_transform(&psi).unwrap();
        assert_eq!(hard.values(), &[0.0, -1.0]);
        // Zero-regularization semi-dual agrees with the hard transform route.
        let e0 = p.semi_dual_with(&psi, Some(0.0)).unwrap();
        assert!((e0 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn hard_transform_lower_bounds_every_soft_transform() {
        let p = random_problem(11, 6, 5, 0.7);
        let psi = crate::synthetic::random_potential(12, 5, 1.0);
        let hard = p.hard_c_transform(&psi).unwrap();
        for lambda in [0.05, 0.3, 1.0, 3.0] {
            let soft = p
                .with_lambda(lambda)
                .unwrap()
                .c_transform(&psi)
                .unwrap();
            for (h, s) in hard.values().iter().zip(soft.values().iter()) {
                assert!(h <= &(s + 1e-12), "hard {h} exceeds soft {s} at lambda {lambda}");
            }
        }
    }

    #[test]
    fn dual_value_at_the_transform_matches_semi_dual_and_unit_mass() {
        let p = random_problem(21, 7, 4, 0.9);
        let psi = crate::synthetic::random_potential(22, 4, 1.0);
        let phi = p.c_transform(&psi).unwrap();
        let mass = p.exponential_mass(&phi, &psi).unwrap();
        assert!((mass - 1.0).abs() <= tol::MASS_IDENTITY_ABS);
        let f = p.dual_value(&phi, &psi).unwrap();
        let e = p.semi_dual(&psi).unwrap();
        assert!((f - e).abs() <= 1e-12);
        // The transform maximizes the dual over the first potential.
        let worse = p.dual_value(&phi.shifted(0.3), &psi).unwrap();
        assert!(worse <= f + 1e-12);
        let tilted = phi.plus_scaled(&vec![1.0; 7], 0.0).unwrap();
        assert_eq!(p.dual_value(&tilted, &psi).unwrap(), f);
    }

    #[test]
    fn plan_marginals_mass_and_conditional_rows_are_consistent() {
        let p = random_problem(31, 9, 6, 0.6);
        let psi = crate::synthetic::random_potential(32, 6, 1.0);
        let plan = p.plan(&psi).unwrap();
        assert!((plan.total_mass() - 1.0).abs() <= tol::MASS_IDENTITY_ABS);
        let rows = plan.row_sums();
        for (r, w) in rows.iter().zip(p.mu().weights().iter()) {
            assert!((r - w).abs() <= tol::MARGINAL_ABS);
        }
        let fam = p.conditionals(&psi).unwrap();
        for i in 0..fam.n_x() {
            let s: f64 = fam.row(i).iter().sum();
            assert!((s - 1.0).abs() <= tol::ROW_SUM_ABS);
        }
        // Column sums of the plan equal the mixed conditional rows.
        let (marginal, fam2) = p.second_marginal(&psi).unwrap();
        assert_eq!(fam, fam2);
        let cols = plan.col_sums();
        for (a, b) in cols.iter().zip(marginal.weights().iter()) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn second_marginal_matches_the_density_formula_route() {
        // Independent route: nu[psi]_j = nu_j exp((psi_j - T'(T(psi))_j)/lambda).
        let p = random_problem(41, 8, 7, 0.8);
        let psi = crate::synthetic::random_potential(42, 7, 1.0);
        let mixed = p.marginal_weights(&psi).unwrap();
        let dd = p.double_transform(&psi).unwrap();
        for j in 0..7 {
            let direct = p.nu().weights()[j]
                * ((psi.values()[j] - dd.values()[j]) / p.lambda()).exp();
            assert!(
                (mixed[j] - direct).abs() <= 1e-12,
                "marginal mismatch at {j}: {} vs {direct}",
                mixed[j]
            );
        }
    }

    #[test]
    fn kl_gap_expression_matches_direct_divergence() {
        let p = random_problem(51, 6, 9, 1.1);
        let psi = crate::synthetic::random_potential(52, 9, 1.0);
        let via_transforms = p.kl_nu_gap(&psi).unwrap();
        let (marginal, _) = p.second_marginal(&psi).unwrap();
        let direct = measure::kl_divergence(p.nu(), &marginal).unwrap();
        assert!((via_transforms - direct).abs() <= tol::KL_IDENTITY_ABS);
        assert!(via_transforms >= -1e-12);
    }

    #[test]
    fn one_step_improves_the_semi_dual_by_the_scaled_divergence() {
        let p = random_problem(61, 5, 8, 0.5);
        let psi = crate::synthetic::random_potential(62, 8, 1.0);
        let kl = p.kl_nu_gap(&psi).unwrap();
        let step = p.step(&psi).unwrap();
        let e0 = p.semi_dual(&psi).unwrap();
        let e1 = p.semi_dual(&step.psi_next).unwrap();
        // Dual-value route: the improvement at fixed first potential is an
        // identity.
        let f0 = p.dual_value(&step.phi_half, &psi).unwrap();
        let f1 = p.dual_value(&step.phi_half, &step.psi_next).unwrap();
        assert!(((f1 - f0) - p.lambda() * kl).abs() <= tol::IMPROVEMENT_IDENTITY_ABS);
        assert!(e1 - e0 >= p.lambda() * kl - tol::IMPROVEMENT_IDENTITY_ABS);
    }

    #[test]
    fn translation_moves_transforms_by_the_opposite_constant() {
        let p = random_problem(71, 6, 6, 0.9);
        let psi = crate::synthetic::random_potential(72, 6, 1.0);
        let a = 0.37;
        let t0 = p.c_transform(&psi).unwrap();
        let t1 = p.c_transform(&psi.shifted(a)).unwrap();
        for (x, y) in t0.values().iter().zip(t1.values().iter()) {
            assert!((y - (x - a)).abs() <= tol::TRANSLATION_ABS);
        }
        let e0 = p.semi_dual(&psi).unwrap();
        let e1 = p.semi_dual(&psi.shifted(a)).unwrap();
        assert!((e1 - e0).abs() <= tol::TRANSLATION_ABS);
    }

    #[test]
    fn transform_oscillation_is_bounded_by_the_cost_oscillation() {
        let p = random_problem(81, 10, 10, 0.4);
        let psi = crate::synthetic::random_potential(82, 10, 3.0);
        let phi = p.c_transform(&psi).unwrap();
        assert!(num::oscillation(phi.values()) <= p.cost().meta().c_osc + tol::OSC_BOUND_ABS);
        let dd = p.double_transform(&psi).unwrap();
        assert!(num::oscillation(dd.values()) <= p.cost().meta().c_osc + tol::OSC_BOUND_ABS);
    }

    #[test]
    fn solve_converges_monotonically_and_reaches_a_fixed_point() {
        let p = random_problem(91, 12, 11, 0.5);
        let psi0 = Potential::zeros(Side::OnY, 11);
        let trace = p.solve(&psi0, 100_000, 1e-13).unwrap();
        assert!(trace.converged);
        assert!(trace.residual <= 1e-13);
        for w in trace.rows.windows(2) {
            assert!(w[1].e >= w[0].e - 1e-12);
            assert!(w[1].delta <= w[0].delta + trace.residual + 1e-12);
        }
        for row in &trace.rows {
            assert!(row.kl >= 0.0);
            assert!(row.delta >= -trace.residual);
            assert!(row.var_gap >= 0.0);
            assert!(row.osc_gap >= 0.0);
        }
        // The final iterate is nearly fixed under one more double transform.
        let dd = p.double_transform(&trace.psi_ref).unwrap();
        let drift = num::sup_abs_diff(dd.values(), trace.psi_ref.values());
        assert!(drift < 1e-5, "fixed-point drift {drift}");
        // And its mean under nu is zero.
        let mean = num::weighted_mean(p.nu().weights(), trace.psi_ref.values());
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn solve_reports_nonconvergence_when_capped() {
        let p = random_problem(101, 8, 8, 0.2);
        let psi0 = Potential::zeros(Side::OnY, 8);
        let trace = p.solve(&psi0, 2, 0.0).unwrap();
        assert!(!trace.converged);
        assert_eq!(trace.rows.len(), 2);
        assert_eq!(trace.iters, 2);
    }

    #[test]
    fn gap_identity_relates_reference_gap_to_plan_divergence() {
        let p = random_problem(111, 7, 7, 0.8);
        let reference = p.solve_reference().unwrap();
        let psi = crate::synthetic::random_potential(112, 7, 0.5);
        let gap = reference.e - p.semi_dual(&psi).unwrap();
        let via_plans = p.lambda() * p.plan_kl(&reference.psi, &psi).unwrap();
        assert!(
            (gap - via_plans).abs() <= tol::GAP_IDENTITY_ABS + reference.residual,
            "gap {gap} vs plan divergence {via_plans}"
        );
    }

    #[test]
    fn k_directional_derivatives_are_nonpositive_in_the_second_order() {
        let p = random_problem(121, 6, 6, 0.7);
        let psi = crate::synthetic::random_potential(122, 6, 1.0);
        let v = crate::synthetic::random_potential(123, 6, 1.0);
        let (_, second) = p
            .k_directional_derivatives(&psi, v.values(), 0.0)
            .unwrap();
        assert!(second <= 0.0);
    }

    #[test]
    fn side_and_length_mismatches_are_rejected() {
        let p = two_point_problem();
        let wrong_side = Potential::on_x(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            p.c_transform(&wrong_side),
            Err(Error::WrongSide { .. })
        ));
        let wrong_len = Potential::on_y(vec![0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            p.c_transform(&wrong_len),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(Potential::on_y(vec![f64::NAN]).is_err());
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let c = CostModel::build(CostKind::Linear, &m, &m).unwrap();
        assert!(Problem::new(m.clone(), m.clone(), c.clone(), 0.0).is_err());
        assert!(Problem::new(m.clone(), m, c, f64::NAN).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_instances_satisfy_the_core_identities(
            seed in 0u64..1000,
            n_x in 2usize..8,
            n_y in 2usize..8,
            lambda in 0.2f64..2.0,
        ) {
            let p = random_problem(seed, n_x, n_y, lambda);
            let psi = crate::synthetic::random_potential(seed.wrapping_add(7), n_y, 1.0);
            let phi = p.c_transform(&psi).unwrap();
            let mass = p.exponential_mass(&phi, &psi).unwrap();
            prop_assert!((mass - 1.0).abs() <= tol::MASS_IDENTITY_ABS);

            let plan = p.plan(&psi).unwrap();
            for (r, w) in plan.row_sums().iter().zip(p.mu().weights().iter()) {
                prop_assert!((r - w).abs() <= tol::MARGINAL_ABS);
            }

            let hard = p.hard_c_transform(&psi).unwrap();
            for (h, s) in hard.values().iter().zip(phi.values().iter()) {
                prop_assert!(*h <= s + 1e-12);
            }

            let kl = p.kl_nu_gap(&psi).unwrap();
            prop_assert!(kl >= -1e-12);
        }

        #[test]
        fn joint_rescaling_commutes_with_transform_and_value(
            seed in 0u64..500,
            n in 2usize..7,
            lambda in 0.3f64..1.5,
            alpha in 0.25f64..3.0,
        ) {
            let p = random_problem(seed, n, n, lambda);
            let psi = crate::synthetic::random_potential(seed.wrapping_add(13), n, 1.0);
            let scaled_cost = p.cost().scaled(alpha).unwrap();
            let ps = Problem::new(
                p.mu().clone(),
                p.nu().clone(),
                scaled_cost,
                alpha * lambda,
            ).unwrap();
            let psi_scaled = Potential::on_y(
                psi.values().iter().map(|v| alpha * v).collect()
            ).unwrap();

            let t = p.c_transform(&psi).unwrap();
            let ts = ps.c_transform(&psi_scaled).unwrap();
            for (a, b) in t.values().iter().zip(ts.values().iter()) {
                prop_assert!((alpha * a - b).abs() <= tol::HOMOGENEITY_ABS * (1.0 + a.abs()));
            }

            let e = p.semi_dual(&psi).unwrap();
            let es = ps.semi_dual(&psi_scaled).unwrap();
            prop_assert!((alpha * e - es).abs() <= tol::HOMOGENEITY_ABS * (1.0 + e.abs()));

            let m = p.marginal_weights(&psi).unwrap();
            let ms = ps.marginal_weights(&psi_scaled).unwrap();
            for (a, b) in m.iter().zip(ms.iter()) {
                prop_assert!((a - b).abs() <= tol::HOMOGENEITY_ABS);
            }
        }
    }
}
