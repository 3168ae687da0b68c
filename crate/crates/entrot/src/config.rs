//! Experiment configuration: the JSON schema the runner consumes, with
//! defaults, validation, and resolution of file-backed inputs.
//!
//! A config names exactly one command, the inputs it needs (an instance,
//! closed-form parameters, or a sampling plan), run controls, an optional
//! list of checks (each command has sensible defaults), and an output
//! directory. Paths are resolved relative to the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annealing::Schedule;
use crate::cost::{CostKind, CostModel};
use crate::diagnostics::Regime;
use crate::error::{Error, Result};
use crate::io;
use crate::measure::{make_grid_measure, DiscreteMeasure, GridSpec};
use crate::sinkhorn::Instance;

/// What a run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fixed-regularization solve with trace and per-iterate checks.
    Solve,
    /// Analytic closed-form series and its certificates.
    Gaussian,
    /// Decreasing-regularization run against a certified reference.
    Anneal,
    /// Replication experiments for the sampling bounds.
    Stats,
    /// Re-derive a previous run and compare reports byte for byte.
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Gaussian => "gaussian",
            Command::Anneal => "anneal",
            Command::Stats => "stats",
            Command::Verify => "verify",
        }
    }
}

/// Where a marginal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSource {
    /// Points and weights embedded in the config.
    Inline(DiscreteMeasure),
    /// A lattice measure built from a density on a box.
    Grid(GridSpec),
    /// A `.json` or `.csv` file next to the config.
    Path(PathBuf),
}

impl MeasureSource {
    pub fn resolve(&self, base: &Path) -> Result<DiscreteMeasure> {
        match self {
            MeasureSource::Inline(m) => Ok(m.clone()),
            MeasureSource::Grid(spec) => make_grid_measure(spec),
            MeasureSource::Path(p) => {
                let full = base.join(p);
                if full.extension().and_then(|e| e.to_str()) == Some("json") {
                    io::read_measure_json(&full)
                } else {
                    io::read_measure_csv(&full)
                }
            }
        }
    }

    fn referenced_file(&self, base: &Path) -> Option<PathBuf> {
        match self {
            MeasureSource::Path(p) => Some(base.join(p)),
            _ => None,
        }
    }
}

/// Where the cost matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSource {
    /// A builtin kind evaluated on the two supports.
    Kind(CostKind),
    /// A row-major CSV matrix with optional curvature moduli.
    Csv {
        path: PathBuf,
        #[serde(default)]
        xi: f64,
        #[serde(default)]
        zeta: f64,
    },
}

impl CostSource {
    pub fn resolve(
        &self,
        base: &Path,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<CostModel> {
        match self {
            CostSource::Kind(kind) => {
                if *kind == CostKind::Explicit {
                    return Err(Error::Config {
                        reason: "explicit cost entries must come from a csv source".into(),
                    });
                }
                CostModel::build(*kind, mu, nu)
            }
            CostSource::Csv { path, xi, zeta } => {
                let (entries, n_x, n_y) = io::read_cost_csv(&base.join(path))?;
                let r_x = (0..mu.len())
                    .map(|i| mu.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                CostModel::from_matrix(entries, n_x, n_y, *xi, *zeta, r_x)
            }
        }
    }

    fn referenced_file(&self, base: &Path) -> Option<PathBuf> {
        match self {
            CostSource::Csv { path, .. } => Some(base.join(path)),
            _ => None,
        }
    }
}

/// The discrete instance and its regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mu: MeasureSource,
    pub nu: MeasureSource,
    pub cost: CostSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
}

impl ProblemConfig {
    pub fn resolve(&self, base: &Path) -> Result<Instance> {
        let mu = self.mu.resolve(base)?;
        let nu = self.nu.resolve(base)?;
        let cost = self.cost.resolve(base, &mu, &nu)?;
        Instance::new(mu, nu, cost)
    }

    pub fn lambda(&self) -> Result<f64> {
        self.lambda.ok_or(Error::Config {
            reason: "this command needs problem.lambda".into(),
        })
    }

    /// The explicit schedule, or a constant one built from `lambda`.
    pub fn schedule(&self) -> Result<Schedule> {
        if let Some(s) = &self.schedule {
            s.validate()?;
            return Ok(s.clone());
        }
        Schedule::constant(self.lambda()?)
    }
}

fn default_gaussian_t_max() -> usize {
    200
}

/// Parameters of the closed-form command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub sigma: f64,
    pub lambda: f64,
    #[serde(default = "default_gaussian_t_max")]
    pub t_max: usize,
}

fn default_sample_size() -> usize {
    256
}

fn default_replications() -> usize {
    500
}

/// Parameters of the replication command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Deviation levels for the coverage check; empty means derive three
    /// levels from the bound itself.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Test-function values on the second support; defaults to the first
    /// coordinate of each support point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            sample_size: default_sample_size(),
            replications: default_replications(),
            epsilons: Vec::new(),
            f: None,
        }
    }
}

fn default_max_iters() -> usize {
    10_000
}

fn default_tol() -> f64 {
    1e-10
}

/// Run controls shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_iters: default_max_iters(),
            tol: default_tol(),
            seed: 0,
        }
    }
}

/// A named check with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Per-iterate improvement inequality.
    OneStep,
    /// Per-iterate variance-to-suboptimality comparison.
    VarianceSubopt,
    /// Geometric decay of the gap at a declared regime's rate.
    Contraction { regime: Regime },
    /// Finite-difference audit of the transform derivatives.
    FdAudit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
    },
    /// Derivative bound for the value as a function of the regularization.
    Sensitivity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_step: Option<f64>,
    },
    /// Soft-vs-hard value sandwich along an annealed run.
    Sandwich,
    /// Annealed gap recursion (weak form; strong form when a regime is
    /// declared).
    Recursion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regime: Option<Regime>,
    },
    /// Shape of the value as a function of the regularization.
    Curve { lambdas: Vec<f64> },
    /// Monte-Carlo variance-gap bound.
    McVariance,
    /// Concentration coverage of replication variances.
    Concentration,
    /// Conditional-variance domination inequalities.
    Dominations,
    /// Closed-form lower-bound certificates.
    GaussianBounds,
    /// Closed-form limiting-ratio agreement.
    GaussianRatio,
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::OneStep => "one_step",
            CheckSpec::VarianceSubopt => "variance_subopt",
            CheckSpec::Contraction { .. } => "contraction",
            CheckSpec::FdAudit { .. } => "fd_audit",
            CheckSpec::Sensitivity { .. } => "sensitivity",
            CheckSpec::Sandwich => "sandwich",
            CheckSpec::Recursion { .. } => "recursion",
            CheckSpec::Curve { .. } => "curve",
            CheckSpec::McVariance => "mc_variance",
            CheckSpec::Concentration => "concentration",
            CheckSpec::Dominations => "dominations",
            CheckSpec::GaussianBounds => "gaussian_bounds",
            CheckSpec::GaussianRatio => "gaussian_ratio",
        }
    }

    fn allowed_for(&self, command: Command) -> bool {
        use CheckSpec::*;
        match command {
            Command::Solve => matches!(
                self,
                OneStep | VarianceSubopt | Contraction { .. } | FdAudit { .. } | Sensitivity { .. }
            ),
            Command::Anneal => matches!(self, Sandwich | Recursion { .. } | Curve { .. }),
            Command::Stats => matches!(self, McVariance | Concentration | Dominations),
            Command::Gaussian => matches!(self, GaussianBounds | GaussianRatio),
            Command::Verify => false,
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsConfig>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parse a config file and return it with its base directory for
    /// resolving relative paths.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let cfg: ExperimentConfig = io::read_json(path)?;
        let base = path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));
        cfg.validate(&base)?;
        Ok((cfg, base))
    }

    /// Command-specific completeness plus existence of referenced files.
    pub fn validate(&self, base: &Path) -> Result<()> {
        match self.command {
            Command::Solve | Command::Stats => {
                let p = self.required_problem()?;
                p.lambda()?;
            }
            Command::Anneal => {
                let p = self.required_problem()?;
                p.schedule()?;
            }
            Command::Gaussian => {
                if self.gaussian.is_none() {
                    return Err(Error::Config {
                        reason: "the gaussian command needs a gaussian section".into(),
                    });
                }
            }
            Command::Verify => {
                if self.problem.is_none() && self.gaussian.is_none() {
                    return Err(Error::Config {
                        reason: "verify needs the sections of the run it re-derives".into(),
                    });
                }
            }
        }
        if let Some(p) = &self.problem {
            for file in [
                p.mu.referenced_file(base),
                p.nu.referenced_file(base),
                p.cost.referenced_file(base),
            ]
            .into_iter()
            .flatten()
            {
                if !file.is_file() {
                    return Err(Error::Config {
                        reason: format!("referenced file does not exist: {}", file.display()),
                    });
                }
            }
        }
        for check in &self.checks {
            let effective = self.effective_command();
            if !check.allowed_for(effective) {
                return Err(Error::Config {
                    reason: format!(
                        "check '{}' does not apply to the {} command",
                        check.name(),
                        self.command.name()
                    ),
                });
            }
            if let CheckSpec::Curve { lambdas } = check {
                if lambdas.len() < 2 {
                    return Err(Error::Config {
                        reason: "curve check needs at least two regularization values".into(),
                    });
                }
            }
        }
        Ok(())
    }

    fn required_problem(&self) -> Result<&ProblemConfig> {
        self.problem.as_ref().ok_or(Error::Config {
            reason: "this command needs a problem section".into(),
        })
    }

    /// The command whose pipeline actually runs: `verify` re-derives the
    /// command implied by the sections present.
    pub fn effective_command(&self) -> Command {
        if self.command != Command::Verify {
            return self.command;
        }
        if self.gaussian.is_some() {
            Command::Gaussian
        } else if self
            .problem
            .as_ref()
            .is_some_and(|p| p.schedule.is_some())
        {
            Command::Anneal
        } else if self.stats.is_some() {
            Command::Stats
        } else {
            Command::Solve
        }
    }

    /// The configured checks, or the command's defaults when none given.
    pub fn effective_checks(&self) -> Vec<CheckSpec> {
        if !self.checks.is_empty() {
            return self.checks.clone();
        }
        match self.effective_command() {
            Command::Solve => vec![
                CheckSpec::OneStep,
                CheckSpec::VarianceSubopt,
                CheckSpec::FdAudit { step: None },
            ],
            Command::Anneal => vec![
                CheckSpec::Sandwich,
                CheckSpec::Recursion { regime: None },
            ],
            Command::Stats => vec![
                CheckSpec::McVariance,
                CheckSpec::Concentration,
                CheckSpec::Dominations,
            ],
            Command::Gaussian => vec![CheckSpec::GaussianBounds, CheckSpec::GaussianRatio],
            Command::Verify => Vec::new(),
        }
    }
}
