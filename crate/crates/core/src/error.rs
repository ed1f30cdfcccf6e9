use thiserror::Error;

/// Errors raised by configuration, evaluation and post-processing.
///
/// Numerical faults that happen *during* a run (non-finite stages, the
/// divergence guard) are not errors: they end the run and are recorded in
/// [`crate::sim::Termination`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: String, expected: String, got: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario `{name}`; valid names are: {}", valid.join(", "))]
    UnknownScenario { name: String, valid: Vec<String> },

    #[error("expression error in `{source_text}`: {message}")]
    Expression { source_text: String, message: String },

    #[error("certificate rejected: {0}")]
    Certificate(String),

    #[error("non-finite value in {field} at t = {t}")]
    NonFinite { field: String, t: f64 },

    #[error("integrity violation: extended regressor asymmetric by {asymmetry:e} (tolerance {tolerance:e})")]
    Integrity { asymmetry: f64, tolerance: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed trace: {0}")]
    Trace(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(what: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
