//! Crate-wide error type.

use std::path::PathBuf;

/// Everything that can go wrong while building instances, running solvers,
/// or reading and writing experiment artifacts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty support: a measure needs at least one point")]
    EmptySupport,

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite input in {what}")]
    NonFinite { what: &'static str },

    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weights sum to {sum}, expected a probability vector (sum 1)")]
    WeightSum { sum: f64 },

    #[error("degenerate density: total mass on the grid is not positive")]
    DegenerateDensity,

    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("dimension mismatch: {what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("mismatched supports: {reason}")]
    SupportMismatch { reason: String },

    #[error("potential is on the wrong side: expected {expected}")]
    WrongSide { expected: &'static str },

    #[error("invalid regime: {reason}")]
    InvalidRegime { reason: String },

    #[error("bracket too wide: half-width {half_width} exceeds requested tolerance {requested}")]
    BracketTooWide { half_width: f64, requested: f64 },

    #[error("sample point at index {index} is not a support point of the base measure")]
    SampleOutsideSupport { index: usize },

    #[error("sampler rejected too many proposals; density is too concentrated for its box")]
    SamplerStalled,

    #[error("config error: {reason}")]
    Config { reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a path to a raw IO error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// A parse failure with file and line context.
    pub fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
