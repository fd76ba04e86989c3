use thiserror::Error;

/// Error type for every fallible operation of the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GjeError {
    #[error("triple outside the admissible set: {0}")]
    Domain(String),
    #[error("value outside the range of G(x, x̄, ·): {0}")]
    Range(String),
    #[error("iteration did not converge: {0}")]
    Convergence(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no envelope piece is admissible at {0}")]
    EmptyEnvelope(String),
    #[error("function leaves the nice interval: {0}")]
    Niceness(String),
    #[error("no admissible bracket: {0}")]
    Infeasible(String),
    #[error("solver stalled: {0}")]
    Stall(String),
    #[error("cell mass not monotone in the height: {0}")]
    Monotonicity(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, GjeError>;

impl From<std::io::Error> for GjeError {
    fn from(e: std::io::Error) -> Self {
        GjeError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GjeError {
    fn from(e: serde_json::Error) -> Self {
        GjeError::Config(e.to_string())
    }
}

impl From<csv::Error> for GjeError {
    fn from(e: csv::Error) -> Self {
        GjeError::Io(e.to_string())
    }
}
