//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("duplicate vertex name `{0}`")]
    DuplicateVertex(String),

    #[error("graph contains a directed cycle")]
    CyclicGraph,

    #[error("selection vertex `{0}` has children; selection variables must be sinks")]
    SelectionHasChildren(String),

    #[error("sets must be pairwise disjoint: `{0}` appears twice")]
    OverlappingSets(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("matrix is not symmetric (max asymmetry {max_dev:e} exceeds tolerance {tol:e})")]
    NotSymmetric { max_dev: f64, tol: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate conditioning set: block is numerically singular")]
    DegenerateConditioning,

    #[error("interval is empty or reversed: lower {lower} must be < upper {upper}")]
    BadInterval { lower: f64, upper: f64 },

    #[error("empty selection window: probability mass below underflow threshold")]
    EmptyWindow,

    #[error("window too narrow for simulation: acceptance rate {rate:e} below 1e-4")]
    WindowTooNarrow { rate: f64 },

    #[error("degenerate coefficient range: magnitudes must satisfy 0 < lo <= hi")]
    DegenerateRange,

    #[error("coefficient map does not match graph edges: {0}")]
    CoefficientMismatch(String),

    #[error("path coefficient for edge {parent} -> {child} must be nonzero")]
    ZeroCoefficient { parent: String, child: String },

    #[error(
        "denominator degenerate: |{value:e}| below {tol:e} x variance scale \
         (separation/connectivity conditions violated empirically)"
    )]
    DegenerateDenominator { value: f64, tol: f64 },

    #[error("zero pattern is not identifiable (odd-cycle condition fails)")]
    PatternNotIdentifiable,

    #[error(
        "inconsistent redundant edge ({a}, {b}): deviation {dev:e} exceeds tolerance \
         (model misspecification)"
    )]
    InconsistentPattern { a: String, b: String, dev: f64 },

    #[error("covariance incompatible with one-factor structure: {0}")]
    IncompatibleCovariance(String),

    #[error("role `{name}` must be a {expected} vertex")]
    RoleTypeMismatch { name: String, expected: String },

    #[error("covariance population must be {expected}")]
    PopulationMismatch { expected: String },

    #[error("factor recovery failed at stage {stage}: {source}")]
    StageFailed {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
