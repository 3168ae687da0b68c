//! Sampling-based checks: empirical mixtures of conditionals, Monte-Carlo
//! variance-gap bounds, concentration coverage, and the conditional-variance
//! domination inequalities.
//!
//! All replication experiments are deterministic: sampling from a discrete
//! measure uses inverse-CDF lookup against the cumulative weights in index
//! order, and replication `k` runs on its own generator seeded with
//! `base_seed + k`, so reports are reproducible bit-for-bit and replications
//! could run concurrently without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::CheckOutcome;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::num;
use crate::sinkhorn::{Potential, Problem};
use crate::tol;

/// A replication experiment: draw `sample_size` points from the first
/// marginal, `replications` times, and study the variance of `f` under the
/// resulting empirical mixtures at the fixed potential `psi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub sample_size: usize,
    pub replications: usize,
    pub seed: u64,
    /// Test-function values on the second support.
    pub f: Vec<f64>,
    /// Fixed potential on the second support.
    pub psi: Potential,
}

impl ReplicationPlan {
    pub fn new(
        sample_size: usize,
        replications: usize,
        seed: u64,
        f: Vec<f64>,
        psi: Potential,
    ) -> Result<Self> {
        if sample_size == 0 || replications == 0 {
            return Err(Error::InvalidParam {
                name: "replication plan",
                reason: "sample size and replication count must be positive".into(),
            });
        }
        if f.len() != psi.len() {
            return Err(Error::LengthMismatch {
                what: "test function",
                expected: psi.len(),
                got: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "test function",
            });
        }
        Ok(ReplicationPlan {
            sample_size,
            replications,
            seed,
            f,
            psi,
        })
    }

    /// `sup |f|`: the sup norm the sampling bounds use (not the
    /// oscillation).
    pub fn sup_f(&self) -> f64 {
        num::sup_abs(&self.f)
    }
}

/// Monte-Carlo variance-gap report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McVarianceReport {
    pub sample_size: usize,
    pub replications: usize,
    /// Mean over replications of the absolute gap between the empirical
    /// mixture variance and the population mixture variance.
    pub mean_abs_gap: f64,
    /// Analytic bound on the expected gap:
    /// `(8 sup|f| / sqrt(N)) * sqrt(Var(f))`.
    pub bound: f64,
    /// Population mixture variance of `f`.
    pub reference_variance: f64,
    pub sup_f: f64,
    /// Experiment-level slack: the bound controls an expectation, so a
    /// finite-replication mean is allowed `bound * 3/sqrt(M)` on top.
    pub statistical_slack: f64,
    pub pass: bool,
    pub slack_rule: String,
}

/// One epsilon of the concentration-coverage report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub epsilon: f64,
    /// Fraction of replications whose variance deviates from the center by
    /// at least `epsilon`.
    pub empirical_tail: f64,
    /// `2 exp(-eps^2 N / (32 sup|f|^4))`.
    pub bound: f64,
    /// Binomial slack added to the bound before comparing.
    pub slack: f64,
    pub pass: bool,
}

/// Full concentration-coverage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub sample_size: usize,
    pub replications: usize,
    pub sup_f: f64,
    /// Across-replication mean of the empirical variances. The analytic
    /// statement centers at the (uncomputable) exact expectation; this
    /// substitution is the documented deviation.
    pub center: f64,
    pub points: Vec<CoveragePoint>,
    /// Tail level of the one-sided high-probability form.
    pub eta: f64,
    /// `(8 sup|f|^2 / sqrt(N)) ln(1/eta)`.
    pub high_prob_threshold: f64,
    /// Fraction of replications exceeding `center + high_prob_threshold`.
    pub high_prob_fraction: f64,
    pub high_prob_pass: bool,
    pub pass: bool,
    pub slack_rule: String,
}

fn cumulative_weights(m: &DiscreteMeasure) -> Vec<f64> {
    let mut cum = Vec::with_capacity(m.len());
    let mut acc = 0.0;
    for w in m.weights() {
        acc += w;
        cum.push(acc);
    }
    cum
}

fn draw_index(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Draw `n` points i.i.d. from a discrete measure (inverse CDF against the
/// cumulative weights in index order) and return the empirical measure with
/// uniform weights `1/n`. Points repeat as sampled.
pub fn sample_from_discrete(m: &DiscreteMeasure, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidParam {
            name: "n",
            reason: "need at least one sample".into(),
        });
    }
    let cum = cumulative_weights(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        points.push(m.point(draw_index(&cum, u)).to_vec());
    }
    DiscreteMeasure::new(points, vec![1.0 / n as f64; n])
}

/// Mixture of conditional rows weighted by an empirical first-marginal
/// measure: each sample point must be a support point of the problem's
/// first marginal.
pub fn empirical_mixture(
    prob: &Problem,
    psi: &Potential,
    mu_n: &DiscreteMeasure,
) -> Result<DiscreteMeasure> {
    let fam = prob.conditionals(psi)?;
    let mut weights = vec![0.0; prob.nu().len()];
    for k in 0..mu_n.len() {
        let i = prob
            .mu()
            .find_point(mu_n.point(k))
            .ok_or(Error::SampleOutsideSupport { index: k })?;
        let row = fam.row(i);
        let w = mu_n.weights()[k];
        for j in 0..weights.len() {
            weights[j] += w * row[j];
        }
    }
    DiscreteMeasure::new(prob.nu().points_vec(), weights)
}

/// Per-replication empirical mixture variances of `f`, in replication
/// order. Replication `k` uses seed `base + k`; the whole series is
/// deterministic in the plan.
pub fn replication_variances(prob: &Problem, plan: &ReplicationPlan) -> Result<Vec<f64>> {
    expect_plan_matches(prob, plan)?;
    let fam = prob.conditionals(&plan.psi)?;
    let n_y = prob.nu().len();
    let cum = cumulative_weights(prob.mu());
    let mut counts = vec![0usize; prob.mu().len()];
    let mut mixture = vec![0.0; n_y];
    let mut out = Vec::with_capacity(plan.replications);
    for rep in 0..plan.replications {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(rep as u64));
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..plan.sample_size {
            let u: f64 = rng.gen();
            counts[draw_index(&cum, u)] += 1;
        }
        mixture.iter_mut().for_each(|w| *w = 0.0);
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                let share = c as f64 / plan.sample_size as f64;
                let row = fam.row(i);
                for j in 0..n_y {
                    mixture[j] += share * row[j];
                }
            }
        }
        out.push(num::weighted_variance(&mixture, &plan.f));
    }
    Ok(out)
}

fn expect_plan_matches(prob: &Problem, plan: &ReplicationPlan) -> Result<()> {
    if plan.psi.len() != prob.nu().len() {
        return Err(Error::LengthMismatch {
            what: "plan potential",
            expected: prob.nu().len(),
            got: plan.psi.len(),
        });
    }
    Ok(())
}

/// Mean absolute gap between empirical and population mixture variance,
/// against the analytic root-N bound.
pub fn mc_variance_gap(prob: &Problem, plan: &ReplicationPlan) -> Result<McVarianceReport> {
    let vars = replication_variances(prob, plan)?;
    let fam = prob.conditionals(&plan.psi)?;
    let mixture = fam.mix(prob.mu().weights());
    let reference_variance = num::weighted_variance(&mixture, &plan.f);
    let sup_f = plan.sup_f();
    let n = plan.sample_size as f64;
    let m = plan.replications as f64;
    let bound = 8.0 * sup_f / n.sqrt() * reference_variance.sqrt();
    let mean_abs_gap =
        vars.iter().map(|v| (v - reference_variance).abs()).sum::<f64>() / m;
    let statistical_slack = 3.0 / m.sqrt();
    Ok(McVarianceReport {
        sample_size: plan.sample_size,
        replications: plan.replications,
        mean_abs_gap,
        bound,
        reference_variance,
        sup_f,
        statistical_slack,
        pass: mean_abs_gap <= bound * (1.0 + statistical_slack),
        slack_rule: "mean_abs_gap <= bound * (1 + 3/sqrt(replications))".into(),
    })
}

/// Tail coverage of the replication variances against the exponential
/// concentration bound, centered at the across-replication mean.
pub fn concentration_coverage(
    prob: &Problem,
    plan: &ReplicationPlan,
    epsilons: &[f64],
) -> Result<CoverageReport> {
    for &eps in epsilons {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParam {
                name: "epsilon",
                reason: format!("must be finite and nonnegative, got {eps}"),
            });
        }
    }
    let vars = replication_variances(prob, plan)?;
    let m = plan.replications as f64;
    let n = plan.sample_size as f64;
    let sup_f = plan.sup_f();
    let center = vars.iter().sum::<f64>() / m;
    let f4 = sup_f.powi(4);
    let mut points = Vec::with_capacity(epsilons.len());
    let mut pass = true;
    for &eps in epsilons {
        let bound = if f4 == 0.0 {
            if eps == 0.0 {
                2.0
            } else {
                0.0
            }
        } else {
            2.0 * (-eps * eps * n / (32.0 * f4)).exp()
        };
        let empirical_tail =
            vars.iter().filter(|v| (**v - center).abs() >= eps).count() as f64 / m;
        let b = bound.min(1.0);
        let slack = 3.0 * (b * (1.0 - b) / m).sqrt() + 1.0 / m;
        let point_pass = empirical_tail <= bound + slack;
        pass &= point_pass;
        points.push(CoveragePoint {
            epsilon: eps,
            empirical_tail,
            bound,
            slack,
            pass: point_pass,
        });
    }
    // One-sided high-probability form at a fixed tail level.
    let eta: f64 = 0.1;
    let high_prob_threshold = 8.0 * sup_f * sup_f / n.sqrt() * (1.0 / eta).ln();
    let high_prob_fraction =
        vars.iter().filter(|v| **v > center + high_prob_threshold).count() as f64 / m;
    let high_prob_pass =
        high_prob_fraction <= eta + 3.0 * (eta * (1.0 - eta) / m).sqrt() + 1.0 / m;
    pass &= high_prob_pass;
    Ok(CoverageReport {
        sample_size: plan.sample_size,
        replications: plan.replications,
        sup_f,
        center,
        points,
        eta,
        high_prob_threshold,
        high_prob_fraction,
        high_prob_pass,
        pass,
        slack_rule: "tail <= bound + 3 sqrt(min(bound,1)(1-min(bound,1))/M) + 1/M; \
                     centered at the replication mean"
            .into(),
    })
}

/// The three domination inequalities for conditional statistics of `f`, in
/// order: variance of the conditional mean, of the conditional second
/// moment, and of the squared conditional mean — each against the mixture
/// variance (the latter two scaled by `2 sup|f|^2`).
pub fn conditional_variance_dominations(
    prob: &Problem,
    psi: &Potential,
    f: &[f64],
) -> Result<[CheckOutcome; 3]> {
    if f.len() != prob.nu().len() {
        return Err(Error::LengthMismatch {
            what: "test function",
            expected: prob.nu().len(),
            got: f.len(),
        });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "test function",
        });
    }
    let fam = prob.conditionals(psi)?;
    let mu_w = prob.mu().weights();
    let mixture = fam.mix(mu_w);
    let mixture_variance = num::weighted_variance(&mixture, f);
    let sup_f = num::sup_abs(f);
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let n_x = fam.n_x();
    let mut cond_mean = vec![0.0; n_x];
    let mut cond_second = vec![0.0; n_x];
    let mut cond_mean_sq = vec![0.0; n_x];
    for i in 0..n_x {
        let e = fam.row_expectation(i, f);
        cond_mean[i] = e;
        cond_second[i] = fam.row_expectation(i, &f2);
        cond_mean_sq[i] = e * e;
    }
    let scaled = 2.0 * sup_f * sup_f * mixture_variance;
    Ok([
        CheckOutcome::upper(
            num::weighted_variance(mu_w, &cond_mean),
            mixture_variance,
            tol::DOMINATION_ABS,
        ),
        CheckOutcome::upper(
            num::weighted_variance(mu_w, &cond_second),
            scaled,
            tol::DOMINATION_ABS,
        ),
        CheckOutcome::upper(
            num::weighted_variance(mu_w, &cond_mean_sq),
            scaled,
            tol::DOMINATION_ABS,
        ),
    ])
}

/// Law of total variance on the discrete instance: returns the mixture
/// variance and its decomposition into explained plus residual parts; the
/// two agree to machine accuracy.
pub fn total_variance_decomposition(
    prob: &Problem,
    psi: &Potential,
    f: &[f64],
) -> Result<(f64, f64)> {
    if f.len() != prob.nu().len() {
        return Err(Error::LengthMismatch {
            what: "test function",
            expected: prob.nu().len(),
            got: f.len(),
        });
    }
    let fam = prob.conditionals(psi)?;
    let mu_w = prob.mu().weights();
    let mixture = fam.mix(mu_w);
    let direct = num::weighted_variance(&mixture, f);
    let n_x = fam.n_x();
    let mut cond_mean = vec![0.0; n_x];
    let mut residual = 0.0;
    for i in 0..n_x {
        cond_mean[i] = fam.row_expectation(i, f);
        residual += mu_w[i] * fam.row_variance(i, f);
    }
    let explained = num::weighted_variance(mu_w, &cond_mean);
    Ok((direct, explained + residual))
}
