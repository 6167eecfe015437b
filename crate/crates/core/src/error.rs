use thiserror::Error;

/// Errors produced by the array model, the solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("operation requires {expected} mode but layout is in {actual} mode")]
    WrongMode {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("rotation state does not match layout: {0}")]
    StateMismatch(String),

    #[error("points coincide: distance {0} m is not positive")]
    CoincidentPoints(f64),

    #[error("zero channel vector")]
    ZeroChannel,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid linear program: {0}")]
    InvalidLp(String),

    #[error("simplex did not terminate within {0} iterations")]
    LpIterationLimit(usize),

    #[error("direction-finding LP is {0} at a feasible point")]
    DirectionLp(&'static str),

    #[error("initial rotation state is infeasible")]
    InfeasibleStart,

    #[error("layout case not covered by the closed-form range analysis: {0}")]
    UncoveredCase(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
