use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("absolute moment of order {p} diverges for nu = {nu} (requires p < nu)")]
    DivergentMoment { nu: f64, p: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty input")]
    EmptyInput,

    #[error("series too short: got {len} points, need more than {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("quadrature did not converge (estimate {value}, abs error {abs_error})")]
    NonConvergence { value: f64, abs_error: f64 },

    #[error("moment ratio curve is not strictly monotone near nu = {nu}")]
    NonMonotone { nu: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("nonpositive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
