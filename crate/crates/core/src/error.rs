use thiserror::Error;

use crate::formulation::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    /// A well-formed document that breaks a model invariant. `field` is a
    /// path such as `nodes[3].processor.capacity`.
    #[error("{field}: {message}")]
    Semantic { field: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unstable queue: arrival rate {lambda} >= service rate {mu}")]
    UnstableQueue { lambda: f64, mu: f64 },

    #[error("arrival rate {lambda} exceeds rho_max bound {bound}")]
    ExceedsRhoMax { lambda: f64, bound: f64 },

    #[error("isolated demand source: {0}")]
    IsolatedSource(String),

    #[error("no eligible processors for setting {0}")]
    NoEligibleProcessors(String),

    #[error("over-capacity utilization {utilization} on {device}")]
    OverCapacity { device: String, utilization: f64 },

    #[error("insufficient capacity: {available} MIPS available, {required} MIPS required")]
    InsufficientCapacity { available: f64, required: f64 },

    #[error("infeasible ({family}): {detail}")]
    Infeasible { family: String, detail: String },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("constraint violation: {0}")]
    Violation(Violation),

    #[error("LP parse error at line {line}: {message}")]
    LpParse { line: usize, message: String },

    #[error("invalid weights: {0}")]
    Weights(String),

    #[error("{0}")]
    Report(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
