use thiserror::Error;

/// Errors produced by geometric evaluation and integration.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("frame matrix is singular at {point:?} (|det| = {det:.3e})")]
    SingularFrame { point: Vec<f64>, det: f64 },

    #[error("metric is degenerate at {point:?} (|det| = {det:.3e})")]
    DegenerateMetric { point: Vec<f64>, det: f64 },

    #[error("no metric attached to this space")]
    MissingMetric,

    #[error("non-finite value in {what} at {point:?}")]
    NonFinite { what: String, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tensor slot error: {0}")]
    SlotMismatch(String),

    #[error("finite-difference step underflow (h = {h:.3e})")]
    StepUnderflow { h: f64 },

    #[error("missing auxiliary data for condition `{condition}`: {what}")]
    MissingAux { condition: String, what: String },

    #[error("condition contract violated: {0}")]
    ContractViolation(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("dragging oracle did not converge: {0}")]
    OracleDivergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
