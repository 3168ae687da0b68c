//! Run reports: graded check rows, JSON-serializable run summaries, a
//! markdown rendering, and plot-ready series with theoretical envelopes.
//!
//! Checks come in two grades. `Hard` rows are unconditional statements
//! whose failure indicates a defect; `Finding` rows depend on regime
//! hypotheses, discretization surrogates, or statistical slack, so their
//! failure is reported as a finding rather than a defect. The exit-code
//! mapping keeps the two apart so CI can gate on hard rows only.

use serde::{Deserialize, Serialize};

use crate::diagnostics::CheckOutcome;
use crate::io::{CsvRow, GaussianSeriesRow};
use crate::sinkhorn::SinkhornTrace;

/// Anchor labels attached to every check row in reports and summaries.
pub mod anchors {
    pub const ONE_STEP: &str = "Prop one-step-improvement";
    pub const VARIANCE_SUBOPT: &str = "Prop variance-suboptimality";
    pub const CONTRACTION: &str = "Thm contraction-main";
    pub const VARIANCE_COMPARISON: &str = "Lemma variance-comparison-inequality";
    pub const TRANSFORM_CONVEXITY: &str = "Lemma transform-convexity";
    pub const SECOND_ORDER: &str = "Lemma semi-dual-second-order-local-approximation";
    pub const TRANSFORM_DERIVATIVES: &str = "Lemma transform-derivatives";
    pub const TRANSFORM_NORMALIZATION: &str = "Prop transform-normalization";
    pub const SOFT_HARD_SANDWICH: &str = "Lemma soft-hard-sandwich";
    pub const ANNEALING_WEAK: &str = "Lemma annealing-weak-recursion";
    pub const ANNEALING_STRONG: &str = "Thm annealing-recursion";
    pub const COST_CURVE: &str = "Prop entropic-cost-curve";
    pub const SENSITIVITY: &str = "Prop regularization-sensitivity";
    pub const MC_VARIANCE: &str = "Thm empirical-variance-gap";
    pub const CONCENTRATION: &str = "Thm variance-concentration";
    pub const DOMINATION: &str = "Lemma conditional-variance-domination";
    pub const TOTAL_VARIANCE: &str = "Law total-variance";
    pub const GAUSSIAN_LOWER_BOUND: &str = "Thm lower-bound-speed-gaussian";
    pub const GAUSSIAN_RATIO: &str = "Thm gaussian-limiting-ratio";
    pub const GAUSSIAN_CLOSED_FORM: &str = "Prop gaussian-closed-form";
    pub const RUNTIME: &str = "runtime";
}

/// Whether a failed check is a defect or a hypothesis-sensitive finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGrade {
    Hard,
    Finding,
}

/// One verified statement in a run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    /// Stable label tying the row to the statement it verifies.
    pub anchor: String,
    pub grade: CheckGrade,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    pub details: String,
}

impl CheckRow {
    pub fn new(name: &str, anchor: &str, grade: CheckGrade, pass: bool) -> Self {
        CheckRow {
            name: name.to_string(),
            anchor: anchor.to_string(),
            grade,
            pass,
            lhs: None,
            rhs: None,
            slack: None,
            details: String::new(),
        }
    }

    pub fn hard(name: &str, anchor: &str, pass: bool) -> Self {
        Self::new(name, anchor, CheckGrade::Hard, pass)
    }

    pub fn finding(name: &str, anchor: &str, pass: bool) -> Self {
        Self::new(name, anchor, CheckGrade::Finding, pass)
    }

    /// Copy the numeric sides of a comparison into the row.
    pub fn with_outcome(mut self, outcome: &CheckOutcome) -> Self {
        self.lhs = Some(outcome.lhs);
        self.rhs = Some(outcome.rhs);
        self.slack = Some(outcome.slack);
        self.pass = outcome.pass;
        self
    }

    pub fn with_details(mut self, details: impl Into<String>) -> Self {
        self.details = details.into();
        self
    }
}

/// Everything a run writes into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub checks: Vec<CheckRow>,
    pub hard_failures: usize,
    pub findings: usize,
    pub pass: bool,
    /// File names written next to the report.
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        RunReport {
            command: command.to_string(),
            seed,
            checks: Vec::new(),
            hard_failures: 0,
            findings: 0,
            pass: true,
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: CheckRow) {
        if !row.pass {
            match row.grade {
                CheckGrade::Hard => self.hard_failures += 1,
                CheckGrade::Finding => self.findings += 1,
            }
        }
        self.pass = self.hard_failures == 0 && self.findings == 0;
        self.checks.push(row);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn artifact(&mut self, name: impl Into<String>) {
        self.artifacts.push(name.into());
    }

    /// Process exit status: 0 all checks pass, 1 a hard check failed,
    /// 2 only finding-grade checks failed.
    pub fn exit_code(&self) -> i32 {
        if self.hard_failures > 0 {
            1
        } else if self.findings > 0 {
            2
        } else {
            0
        }
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|")
}

/// Markdown table mapping every check to its anchor, grade, and status.
pub fn summary_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("# Run summary\n\n");
    out.push_str(&format!("- command: {}\n", report.command));
    out.push_str(&format!("- seed: {}\n", report.seed));
    out.push_str(&format!(
        "- checks: {} (hard failures: {}, findings: {})\n",
        report.checks.len(),
        report.hard_failures,
        report.findings
    ));
    out.push_str(&format!(
        "- overall: {}\n\n",
        if report.pass { "pass" } else { "fail" }
    ));
    out.push_str("| check | anchor | grade | status | detail |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &report.checks {
        let grade = match row.grade {
            CheckGrade::Hard => "hard",
            CheckGrade::Finding => "finding",
        };
        let status = if row.pass { "pass" } else { "FAIL" };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            cell(&row.name),
            cell(&row.anchor),
            grade,
            status,
            cell(&row.details)
        ));
    }
    if !report.artifacts.is_empty() {
        out.push_str("\n## Artifacts\n\n");
        for a in &report.artifacts {
            out.push_str(&format!("- {a}\n"));
        }
    }
    if !report.notes.is_empty() {
        out.push_str("\n## Notes\n\n");
        for n in &report.notes {
            out.push_str(&format!("- {n}\n"));
        }
    }
    out
}

/// One plot-ready row: the measured gap next to its theoretical envelopes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlotRow {
    pub t: usize,
    pub delta: f64,
    /// Geometric envelope `(1 - 1/alpha)^t * delta_0` when a contraction
    /// rate is available.
    pub envelope: Option<f64>,
    /// Analytic lower bound when available.
    pub lower_bound: Option<f64>,
    /// `ln(delta_{t+1} / delta_t)` for rate plots; absent on the last row
    /// or when a gap vanishes.
    pub log_ratio: Option<f64>,
}

impl CsvRow for PlotRow {
    const HEADER: &'static [&'static str] =
        &["t", "delta", "envelope", "lower_bound", "log_ratio"];
}

/// Plot series for a solve trace, with the geometric envelope from a
/// contraction rate if one is supplied.
pub fn plot_rows_from_trace(trace: &SinkhornTrace, alpha: Option<f64>) -> Vec<PlotRow> {
    let rows = &trace.rows;
    let delta0 = rows.first().map(|r| r.delta).unwrap_or(0.0);
    let rate = alpha.map(|a| 1.0 - 1.0 / a);
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            let next = rows.get(k + 1).map(|n| n.delta);
            let log_ratio = match next {
                Some(n) if n > 0.0 && r.delta > 0.0 => Some((n / r.delta).ln()),
                _ => None,
            };
            PlotRow {
                t: r.t,
                delta: r.delta,
                envelope: rate.map(|q| delta0 * q.powi(k as i32)),
                lower_bound: None,
                log_ratio,
            }
        })
        .collect()
}

/// Plot series for the analytic closed-form run.
pub fn plot_rows_from_gaussian(rows: &[GaussianSeriesRow]) -> Vec<PlotRow> {
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            let next = rows.get(k + 1).map(|n| n.delta);
            let log_ratio = match next {
                Some(n) if n > 0.0 && r.delta > 0.0 => Some((n / r.delta).ln()),
                _ => None,
            };
            PlotRow {
                t: r.t,
                delta: r.delta,
                envelope: None,
                lower_bound: r.lower_bound,
                log_ratio,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sinkhorn::{Potential, Side};
    use crate::synthetic;

    #[test]
    fn exit_codes_separate_defects_from_findings() {
        let mut r = RunReport::new("solve", 1);
        r.push(CheckRow::hard("a", anchors::ONE_STEP, true));
        assert_eq!(r.exit_code(), 0);
        assert!(r.pass);
        r.push(CheckRow::finding("b", anchors::CONTRACTION, false));
        assert_eq!(r.exit_code(), 2);
        assert!(!r.pass);
        r.push(CheckRow::hard("c", anchors::VARIANCE_COMPARISON, false));
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.hard_failures, 1);
        assert_eq!(r.findings, 1);
    }

    #[test]
    fn summary_table_carries_anchors_and_escapes_pipes() {
        let mut r = RunReport::new("verify", 7);
        r.push(
            CheckRow::hard("one-step improvement", anchors::ONE_STEP, true)
                .with_details("max |slack| = 1e-12"),
        );
        r.artifact("trace.csv");
        r.note("details contain a | pipe");
        let md = summary_markdown(&r);
        assert!(md.contains("Prop one-step-improvement"));
        assert!(md.contains("| hard | pass |"));
        assert!(md.contains("- trace.csv"));
        assert!(md.contains("overall: pass"));
    }

    #[test]
    fn trace_plot_rows_align_envelope_and_log_ratio() {
        let p = synthetic::random_problem(3, 6, 5, 0.6, 1.0);
        let trace = p.solve(&Potential::zeros(Side::OnY, 5), 12, 0.0).unwrap();
        let rows = plot_rows_from_trace(&trace, Some(2.0));
        assert_eq!(rows.len(), trace.rows.len());
        assert_eq!(rows[0].envelope, Some(trace.rows[0].delta));
        let second = rows[1].envelope.unwrap();
        assert!((second - 0.5 * trace.rows[0].delta).abs() <= 1e-15);
        // Log ratios are present wherever consecutive gaps are positive.
        for k in 0..rows.len() - 1 {
            if trace.rows[k].delta > 0.0 && trace.rows[k + 1].delta > 0.0 {
                let lr = rows[k].log_ratio.unwrap();
                let expect = (trace.rows[k + 1].delta / trace.rows[k].delta).ln();
                assert!((lr - expect).abs() <= 1e-15);
            }
        }
        assert!(rows.last().unwrap().log_ratio.is_none());
        // Without a rate there is no envelope.
        let bare = plot_rows_from_trace(&trace, None);
        assert!(bare.iter().all(|r| r.envelope.is_none()));
    }

    #[test]
    fn gaussian_plot_rows_keep_bounds_below_gaps() {
        let g = crate::gaussian::GaussianProblem::new(1.0, 0.1).unwrap();
        let deltas = g.delta_series(30).unwrap();
        let rows: Vec<GaussianSeriesRow> = deltas
            .iter()
            .enumerate()
            .map(|(t, &delta)| GaussianSeriesRow {
                t,
                alpha: 0.0,
                e: 0.0,
                delta,
                lower_bound: Some(g.gap_lower_bound(t).unwrap()),
                ratio: None,
            })
            .collect();
        let plot = plot_rows_from_gaussian(&rows);
        for row in &plot {
            assert!(row.lower_bound.unwrap() <= row.delta + 1e-12);
        }
        assert!(plot[0].log_ratio.is_some());
    }
}
