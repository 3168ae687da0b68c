//! Experiment runner: loads a config, executes its command, evaluates the
//! requested checks, and writes artifacts into the output directory.
//!
//! Every command writes `trace.csv`, `report.json`, and `summary.md`;
//! commands add extras (`trace.json`, `plot.csv`, `curve.csv`,
//! `contraction.csv`, `stats.json`, `reference.json`). All writes are
//! atomic and all content is a pure function of the config and seed, so
//! rerunning a config reproduces every artifact byte for byte. The
//! `verify` command re-derives the run implied by the config's sections
//! and compares the fresh `report.json` against the previously saved one.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::annealing;
use crate::config::{CheckSpec, Command, ExperimentConfig, ProblemConfig};
use crate::diagnostics::{self, CheckOutcome, Regime};
use crate::error::{Error, Result};
use crate::gaussian::GaussianProblem;
use crate::io::{self, GaussianSeriesRow};
use crate::report::{self, anchors, CheckGrade, CheckRow, RunReport};
use crate::sinkhorn::{Potential, Side, SinkhornTrace};
use crate::stats::{self, ReplicationPlan};
use crate::synthetic;
use crate::tol;

/// What the byte comparison of a `verify` run found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyStatus {
    /// Not a verify run.
    NotVerify,
    /// No previous report existed; this run wrote the first one.
    Fresh,
    /// The re-derived report matches the saved one byte for byte.
    Match,
    /// The re-derived report differs from the saved one.
    Mismatch,
}

/// A finished run: its report, where it wrote, and the verify outcome.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub out_dir: PathBuf,
    pub verify: VerifyStatus,
}

impl RunOutcome {
    /// 0 all checks pass, 1 defect (hard check failed), 2 findings only.
    /// A verify mismatch counts as a finding.
    pub fn exit_code(&self) -> i32 {
        let base = self.report.exit_code();
        if self.verify == VerifyStatus::Mismatch && base == 0 {
            2
        } else {
            base
        }
    }
}

/// Load a config and run it. `out_override` and `seed_override` take
/// precedence over the config's `output` and `run.seed`.
pub fn run(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunOutcome> {
    let (mut cfg, base) = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.run.seed = seed;
    }
    let out_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => match &cfg.output {
            Some(o) => base.join(o),
            None => {
                return Err(Error::Config {
                    reason: "no output directory: set output in the config or pass --out".into(),
                })
            }
        },
    };
    io::ensure_dir(&out_dir)?;
    let report_path = out_dir.join("report.json");
    let previous = if cfg.command == Command::Verify {
        Some(std::fs::read(&report_path).ok())
    } else {
        None
    };

    let report = match cfg.effective_command() {
        Command::Solve => run_solve(&cfg, &base, &out_dir)?,
        Command::Gaussian => run_gaussian(&cfg, &out_dir)?,
        Command::Anneal => run_anneal(&cfg, &base, &out_dir)?,
        Command::Stats => run_stats(&cfg, &base, &out_dir)?,
        Command::Verify => unreachable!("verify always maps to a concrete pipeline"),
    };
    io::write_json(&report_path, &report)?;
    io::write_atomic(
        &out_dir.join("summary.md"),
        report::summary_markdown(&report).as_bytes(),
    )?;

    let verify = match previous {
        None => VerifyStatus::NotVerify,
        Some(None) => VerifyStatus::Fresh,
        Some(Some(old)) => {
            let new = std::fs::read(&report_path).map_err(|e| Error::io(&report_path, e))?;
            if old == new {
                VerifyStatus::Match
            } else {
                VerifyStatus::Mismatch
            }
        }
    };
    Ok(RunOutcome {
        report,
        out_dir,
        verify,
    })
}

fn required_problem<'a>(cfg: &'a ExperimentConfig) -> Result<&'a ProblemConfig> {
    cfg.problem.as_ref().ok_or(Error::Config {
        reason: "this command needs a problem section".into(),
    })
}

fn unsupported_check(check: &CheckSpec, command: &str) -> Error {
    Error::Config {
        reason: format!("check '{}' does not apply to the {command} command", check.name()),
    }
}

/// Collapse per-step outcomes into one row: pass iff all pass, detail the
/// count and the worst margin.
fn row_from_outcomes(
    name: &str,
    anchor: &str,
    grade: CheckGrade,
    outcomes: &[CheckOutcome],
) -> CheckRow {
    let pass = outcomes.iter().all(|o| o.pass);
    let worst = outcomes
        .iter()
        .map(|o| o.margin())
        .fold(f64::INFINITY, f64::min);
    CheckRow::new(name, anchor, grade, pass).with_details(format!(
        "{} comparisons, worst margin {worst:.3e}",
        outcomes.len()
    ))
}

fn convergence_row(trace: &SinkhornTrace, max_iters: usize) -> CheckRow {
    CheckRow::finding("solver converged", anchors::RUNTIME, trace.converged).with_details(
        format!(
            "{} of {max_iters} iterations, residual {:.3e}",
            trace.iters, trace.residual
        ),
    )
}

fn run_solve(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<RunReport> {
    let pcfg = required_problem(cfg)?;
    let inst = pcfg.resolve(base)?;
    let lambda = pcfg.lambda()?;
    let prob = inst.problem(lambda)?;
    let psi0 = Potential::zeros(Side::OnY, inst.nu().len());
    let trace = prob.solve(&psi0, cfg.run.max_iters, cfg.run.tol)?;
    let c_inf = inst.c_osc();

    let mut report = RunReport::new("solve", cfg.run.seed);
    report.push(convergence_row(&trace, cfg.run.max_iters));
    let mut contraction_alpha = None;
    for check in cfg.effective_checks() {
        match &check {
            CheckSpec::OneStep => {
                let outcomes = diagnostics::verify_one_step_trace(&trace, c_inf);
                report.push(row_from_outcomes(
                    "per-step decrement controls the gap",
                    anchors::ONE_STEP,
                    CheckGrade::Hard,
                    &outcomes,
                ));
            }
            CheckSpec::VarianceSubopt => {
                let (c1, c2) =
                    diagnostics::variance_bound_constants(Regime::Bounded, c_inf, lambda)?;
                let outcomes = diagnostics::verify_variance_subopt_trace(&trace, c1, c2);
                report.push(row_from_outcomes(
                    "potential variance controls suboptimality",
                    anchors::VARIANCE_SUBOPT,
                    CheckGrade::Hard,
                    &outcomes,
                ));
            }
            CheckSpec::Contraction { regime } => {
                let alpha = diagnostics::contraction_rate(*regime, c_inf, lambda)?;
                contraction_alpha = Some(alpha);
                let contraction = diagnostics::verify_contraction(&trace, alpha)?;
                io::write_csv_rows(&out.join("contraction.csv"), &contraction.steps)?;
                io::write_json(&out.join("contraction.json"), &contraction)?;
                report.artifact("contraction.csv");
                report.artifact("contraction.json");
                report.push(
                    CheckRow::finding(
                        "gap contracts at the declared rate",
                        anchors::CONTRACTION,
                        contraction.pass,
                    )
                    .with_details(format!(
                        "alpha {:.6}, per-step bound {:.6}, eligible steps {}, violations {}",
                        contraction.alpha,
                        contraction.bound,
                        contraction.eligible_steps,
                        contraction.violations
                    )),
                );
            }
            CheckSpec::FdAudit { step } => {
                let v = synthetic::random_unit_oscillation(cfg.run.seed, inst.nu().len());
                let audit = diagnostics::fd_derivative_audit(
                    &prob,
                    &trace.psi_ref,
                    &v,
                    step.unwrap_or(tol::FD_DEFAULT_STEP),
                )?;
                report.push(
                    CheckRow::hard(
                        "transform derivatives match finite differences",
                        anchors::TRANSFORM_DERIVATIVES,
                        audit.pass,
                    )
                    .with_details(format!(
                        "rel error first {:.3e}, second {:.3e}; max second derivative {:.3e}",
                        audit.max_rel_first, audit.max_rel_second, audit.max_second
                    )),
                );
            }
            CheckSpec::Sensitivity { h_step } => {
                let h = h_step.unwrap_or(lambda * 1e-3);
                let s = annealing::regularization_sensitivity_check(
                    &inst,
                    &trace.psi_ref,
                    lambda,
                    h,
                )?;
                report.push(
                    CheckRow::hard(
                        "value responds slowly to regularization",
                        anchors::SENSITIVITY,
                        s.pass,
                    )
                    .with_details(format!(
                        "|fd| {:.6e}, bound {:.6e}, tight bound {:.6e}",
                        s.fd.abs(),
                        s.bound,
                        s.tight_bound
                    )),
                );
            }
            other => return Err(unsupported_check(other, "solve")),
        }
    }
    io::write_trace_csv(&out.join("trace.csv"), &trace)?;
    io::write_json(&out.join("trace.json"), &trace)?;
    let plot = report::plot_rows_from_trace(&trace, contraction_alpha);
    io::write_csv_rows(&out.join("plot.csv"), &plot)?;
    report.artifact("trace.csv");
    report.artifact("trace.json");
    report.artifact("plot.csv");
    Ok(report)
}

fn run_gaussian(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let gc = cfg.gaussian.as_ref().ok_or(Error::Config {
        reason: "the gaussian command needs a gaussian section".into(),
    })?;
    let g = GaussianProblem::new(gc.sigma, gc.lambda)?;
    let series = g.centered_series(gc.t_max.max(1))?;
    let in_regime = g.expect_certificate_regime().is_ok();

    let mut rows = Vec::with_capacity(series.len());
    for (k, p) in series.iter().enumerate() {
        let lower_bound = if in_regime {
            Some(g.gap_lower_bound(p.t)?)
        } else {
            None
        };
        let ratio = series
            .get(k + 1)
            .and_then(|n| (p.delta > 0.0).then(|| n.delta / p.delta));
        rows.push(GaussianSeriesRow {
            t: p.t,
            alpha: p.alpha,
            e: g.semidual_value(p.alpha)?,
            delta: p.delta,
            lower_bound,
            ratio,
        });
    }

    let mut report = RunReport::new("gaussian", cfg.run.seed);
    let opt = g.optimal_value();
    let at_fixed_point = g.semidual_value(g.fixed_point_alpha())?;
    let closed_form_ok =
        (opt - at_fixed_point).abs() <= tol::CONSTANTS_REL * opt.abs().max(1.0);
    report.push(
        CheckRow::hard(
            "fixed point evaluates to the optimal value",
            anchors::GAUSSIAN_CLOSED_FORM,
            closed_form_ok,
        )
        .with_details(format!("optimal {opt:.15}, at fixed point {at_fixed_point:.15}")),
    );

    for check in cfg.effective_checks() {
        match &check {
            CheckSpec::GaussianBounds => {
                if !in_regime {
                    report.push(
                        CheckRow::finding(
                            "gap certificates",
                            anchors::GAUSSIAN_LOWER_BOUND,
                            true,
                        )
                        .with_details(
                            "skipped: certificates need lambda <= sigma/5".to_string(),
                        ),
                    );
                    continue;
                }
                let mut worst_gap = f64::INFINITY;
                let mut worst_offset = f64::INFINITY;
                for p in &series {
                    worst_gap = worst_gap.min(p.delta - g.gap_lower_bound(p.t)?);
                    worst_offset = worst_offset.min(p.d - g.alpha_offset_lower_bound(p.t)?);
                }
                let pass = worst_gap >= -1e-12 && worst_offset >= -1e-12;
                report.push(
                    CheckRow::hard(
                        "analytic gaps dominate their certificates",
                        anchors::GAUSSIAN_LOWER_BOUND,
                        pass,
                    )
                    .with_details(format!(
                        "{} steps, worst gap margin {worst_gap:.3e}, worst offset margin \
                         {worst_offset:.3e}",
                        series.len()
                    )),
                );
            }
            CheckSpec::GaussianRatio => {
                let window = series.iter().enumerate().find(|(k, p)| {
                    p.d.abs() < tol::RATIO_WINDOW_ABS && p.d != 0.0 && *k + 1 < series.len()
                });
                match window {
                    None => {
                        report.push(
                            CheckRow::finding(
                                "measured ratios match analytic limits",
                                anchors::GAUSSIAN_RATIO,
                                false,
                            )
                            .with_details(format!(
                                "iterate never got within {:.0e} of the fixed point in {} \
                                 steps; raise t_max",
                                tol::RATIO_WINDOW_ABS,
                                gc.t_max
                            )),
                        );
                    }
                    Some((k, p)) => {
                        let alpha_ratio = series[k + 1].d / p.d;
                        let alpha_err = (alpha_ratio - g.limiting_ratio()).abs();
                        let delta_ratio = if p.delta > 0.0 {
                            series[k + 1].delta / p.delta
                        } else {
                            g.limiting_delta_ratio()
                        };
                        let delta_err = (delta_ratio - g.limiting_delta_ratio()).abs();
                        let pass = alpha_err <= tol::GAUSSIAN_RATIO_ABS
                            && delta_err <= tol::GAUSSIAN_RATIO_ABS;
                        report.push(
                            CheckRow::finding(
                                "measured ratios match analytic limits",
                                anchors::GAUSSIAN_RATIO,
                                pass,
                            )
                            .with_details(format!(
                                "at t={}: offset ratio err {alpha_err:.3e}, gap ratio err \
                                 {delta_err:.3e}",
                                p.t
                            )),
                        );
                    }
                }
            }
            other => return Err(unsupported_check(other, "gaussian")),
        }
    }
    io::write_csv_rows(&out.join("trace.csv"), &rows)?;
    io::write_csv_rows(&out.join("plot.csv"), &report::plot_rows_from_gaussian(&rows))?;
    report.artifact("trace.csv");
    report.artifact("plot.csv");
    Ok(report)
}

fn run_anneal(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<RunReport> {
    let pcfg = required_problem(cfg)?;
    let inst = pcfg.resolve(base)?;
    let schedule = pcfg.schedule()?;
    let trace = annealing::run_annealed(&inst, schedule, cfg.run.max_iters.max(1))?;
    let reference = &trace.reference;

    let mut report = RunReport::new("anneal", cfg.run.seed);
    report.push(
        CheckRow::hard("reference bracket certified", anchors::RUNTIME, true).with_details(
            format!(
                "value {:.12} +- {:.3e} (certifying lambda {:.3e}, {} transforms)",
                reference.value, reference.half_width, reference.lambda_ref, reference.iters
            ),
        ),
    );
    let min_eta = trace
        .rows
        .iter()
        .map(|r| r.eta)
        .fold(f64::INFINITY, f64::min);
    report.push(
        CheckRow::hard(
            "gap stays above the bracket floor",
            anchors::RUNTIME,
            min_eta >= -reference.half_width - 1e-12,
        )
        .with_details(format!(
            "min gap {min_eta:.3e}, bracket half-width {:.3e}",
            reference.half_width
        )),
    );

    for check in cfg.effective_checks() {
        match &check {
            CheckSpec::Sandwich => {
                let outcomes = annealing::verify_annealed_sandwich(&trace);
                let min_gap = outcomes
                    .iter()
                    .map(|o| o.lhs)
                    .fold(f64::INFINITY, f64::min);
                report.push(
                    CheckRow::hard(
                        "regularized value dominates unregularized",
                        anchors::SOFT_HARD_SANDWICH,
                        min_gap >= -tol::SANDWICH_ABS,
                    )
                    .with_details(format!("min gap {min_gap:.3e}")),
                );
                let worst_excess = outcomes
                    .iter()
                    .map(|o| o.lhs - o.rhs)
                    .fold(f64::NEG_INFINITY, f64::max);
                report.push(
                    CheckRow::finding(
                        "soft-hard gap at most the step regularization",
                        anchors::SOFT_HARD_SANDWICH,
                        worst_excess <= tol::SANDWICH_ABS,
                    )
                    .with_details(format!(
                        "worst gap excess {worst_excess:.3e}; guaranteed when \
                         2 c_osc <= min lambda (c_osc {:.3e})",
                        inst.c_osc()
                    )),
                );
            }
            CheckSpec::Recursion { regime } => {
                let steps =
                    annealing::verify_annealed_recursion(&trace, inst.c_osc(), *regime)?;
                let weak: Vec<CheckOutcome> = steps.iter().map(|s| s.weak).collect();
                report.push(row_from_outcomes(
                    "gap never grows by more than the step regularization",
                    anchors::ANNEALING_WEAK,
                    CheckGrade::Finding,
                    &weak,
                ));
                if regime.is_some() {
                    let strong: Vec<CheckOutcome> =
                        steps.iter().filter_map(|s| s.strong).collect();
                    report.push(row_from_outcomes(
                        "gap contracts along the schedule",
                        anchors::ANNEALING_STRONG,
                        CheckGrade::Finding,
                        &strong,
                    ));
                }
            }
            CheckSpec::Curve { lambdas } => {
                let points = annealing::entropic_cost_curve(&inst, lambdas)?;
                let shape = annealing::check_cost_curve(&points);
                io::write_curve_csv(&out.join("curve.csv"), &points)?;
                report.artifact("curve.csv");
                report.push(
                    CheckRow::hard(
                        "value curve is nondecreasing and concave",
                        anchors::COST_CURVE,
                        shape.pass,
                    )
                    .with_details(format!(
                        "{} points, monotonicity violation {:.3e}, concavity violation {:.3e}",
                        points.len(),
                        shape.max_monotonicity_violation,
                        shape.max_concavity_violation
                    )),
                );
            }
            other => return Err(unsupported_check(other, "anneal")),
        }
    }
    io::write_annealed_csv(&out.join("trace.csv"), &trace)?;
    io::write_json(&out.join("reference.json"), reference)?;
    report.artifact("trace.csv");
    report.artifact("reference.json");
    Ok(report)
}

/// Full sub-reports of the replication experiments, for `stats.json`.
#[derive(Debug, Default, Serialize)]
struct StatsArtifacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_variance: Option<stats::McVarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<stats::CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dominations: Option<[CheckOutcome; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_variance: Option<(f64, f64)>,
}

fn run_stats(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<RunReport> {
    let pcfg = required_problem(cfg)?;
    let inst = pcfg.resolve(base)?;
    let lambda = pcfg.lambda()?;
    let prob = inst.problem(lambda)?;
    let psi0 = Potential::zeros(Side::OnY, inst.nu().len());
    let trace = prob.solve(&psi0, cfg.run.max_iters, cfg.run.tol)?;
    let sc = cfg.stats.clone().unwrap_or_default();
    let f: Vec<f64> = match &sc.f {
        Some(f) => f.clone(),
        None => (0..inst.nu().len())
            .map(|j| inst.nu().point(j)[0])
            .collect(),
    };
    let plan = ReplicationPlan::new(
        sc.sample_size,
        sc.replications,
        cfg.run.seed,
        f.clone(),
        trace.psi_ref.clone(),
    )?;

    let mut report = RunReport::new("stats", cfg.run.seed);
    report.push(convergence_row(&trace, cfg.run.max_iters));
    let mut extras = StatsArtifacts::default();
    for check in cfg.effective_checks() {
        match &check {
            CheckSpec::McVariance => {
                let r = stats::mc_variance_gap(&prob, &plan)?;
                report.push(
                    CheckRow::finding(
                        "mean variance gap within the root-n bound",
                        anchors::MC_VARIANCE,
                        r.pass,
                    )
                    .with_details(format!(
                        "mean gap {:.6e}, bound {:.6e} (+{:.1}% statistical slack)",
                        r.mean_abs_gap,
                        r.bound,
                        100.0 * r.statistical_slack
                    )),
                );
                extras.mc_variance = Some(r);
            }
            CheckSpec::Concentration => {
                let epsilons = if sc.epsilons.is_empty() {
                    let sup_f = plan.sup_f();
                    let n = plan.sample_size as f64;
                    [1.0f64, 0.5, 0.1]
                        .iter()
                        .map(|p| (32.0 * sup_f.powi(4) * (2.0 / p).ln() / n).sqrt())
                        .collect()
                } else {
                    sc.epsilons.clone()
                };
                let r = stats::concentration_coverage(&prob, &plan, &epsilons)?;
                let worst = r
                    .points
                    .iter()
                    .map(|p| p.empirical_tail - (p.bound + p.slack))
                    .fold(f64::NEG_INFINITY, f64::max);
                report.push(
                    CheckRow::finding(
                        "tail fractions within the exponential bound",
                        anchors::CONCENTRATION,
                        r.pass,
                    )
                    .with_details(format!(
                        "{} levels, worst tail excess {worst:.3e}; high-prob fraction {:.4} \
                         at eta {:.2}",
                        r.points.len(),
                        r.high_prob_fraction,
                        r.eta
                    )),
                );
                extras.coverage = Some(r);
            }
            CheckSpec::Dominations => {
                let checks = stats::conditional_variance_dominations(&prob, &plan.psi, &f)?;
                report.push(row_from_outcomes(
                    "conditional statistics dominated by mixture variance",
                    anchors::DOMINATION,
                    CheckGrade::Hard,
                    &checks,
                ));
                let (direct, decomposed) =
                    stats::total_variance_decomposition(&prob, &plan.psi, &f)?;
                let err = (direct - decomposed).abs();
                report.push(
                    CheckRow::hard(
                        "variance decomposes into explained plus residual",
                        anchors::TOTAL_VARIANCE,
                        err <= tol::TOTAL_VARIANCE_ABS * direct.abs().max(1.0),
                    )
                    .with_details(format!("direct {direct:.12e}, decomposed {decomposed:.12e}")),
                );
                extras.dominations = Some(checks);
                extras.total_variance = Some((direct, decomposed));
            }
            other => return Err(unsupported_check(other, "stats")),
        }
    }
    let variances = stats::replication_variances(&prob, &plan)?;
    io::write_replication_csv(&out.join("trace.csv"), &variances)?;
    io::write_json(&out.join("stats.json"), &extras)?;
    report.artifact("trace.csv");
    report.artifact("stats.json");
    Ok(report)
}
