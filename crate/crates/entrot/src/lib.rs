#![forbid(unsafe_code)]
//! Entropy-regularized optimal transport on discrete measures.
//!
//! The crate solves
//!
//! ```text
//! minimize   <c, gamma> + lambda * KL(gamma | mu (x) nu)
//! ```
//!
//! over couplings `gamma` of two discrete probability measures `mu` and `nu`,
//! via log-domain Sinkhorn iteration on the semi-dual potential, and ships the
//! machinery needed to *check* the quantitative behavior of that iteration at
//! desk scale:
//!
//! * [`measure`]: discrete measures, grid construction, sampling, moments,
//!   Kullback-Leibler divergence.
//! * [`cost`]: dense cost matrices (builtin bilinear / squared-distance kinds
//!   or explicit matrices) with oscillation and smoothness metadata.
//! * [`sinkhorn`]: soft and hard conjugate transforms, dual/semi-dual values,
//!   couplings and conditional families, single steps, and full solves with
//!   per-iteration traces.
//! * [`gaussian`]: exact scalar recursion for the one-dimensional Gaussian
//!   bilinear-cost problem, used as a closed-form baseline for convergence
//!   rates and lower bounds.
//! * [`annealing`]: schedules that shrink the regularization over time, an
//!   unregularized reference value with a certified bracket, and the value
//!   curve in the regularization parameter.
//! * [`stats`]: replication experiments for variance estimation from sampled
//!   first marginals, with mean-gap and concentration bounds.
//! * [`diagnostics`]: closed-form contraction constants and checkers for the
//!   one-step improvement, variance-suboptimality, contraction-rate,
//!   variance-comparison, convexity, and derivative identities.
//! * [`synthetic`]: seeded random instances shared by tests, examples, and
//!   the command line runner.
//! * [`config`] / [`runner`] / [`report`]: config-driven experiment runs that
//!   write `trace.csv`, `report.json`, `summary.md`, and plot series.
//!
//! All floating point work is `f64`. Reductions run in a fixed index order so
//! that identical inputs produce byte-identical outputs; the `ENTROT_THREADS`
//! environment variable caps internal parallelism without changing results.

pub mod annealing;
pub mod config;
pub mod cost;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod measure;
pub mod num;
pub mod report;
pub mod runner;
pub mod sinkhorn;
pub mod stats;
pub mod synthetic;
pub mod tol;

pub use error::{Error, Result};
