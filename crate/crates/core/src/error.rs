use thiserror::Error;

/// Errors raised by the persuasion engine, simulator, oracle and solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid information structure: {0}")]
    InvalidStructure(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("unreachable signal `{0}`: zero marginal probability under the given belief")]
    UnreachableSignal(String),

    #[error("signal `{signal}` is not in the support of state `{state}`")]
    SignalNotInSupport { signal: String, state: String },

    #[error("information structures do not share the same signal set")]
    SignalMismatch,

    #[error(
        "switching threshold must be finite and strictly greater than 1 (alpha = 1 leaves no hysteresis band), got {0}"
    )]
    InvalidAlpha(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("epsilon must lie in [0, 1], got {0}")]
    EpsilonOutOfRange(f64),

    #[error("scenario must have exactly two states and two actions: {0}")]
    NotBinary(String),

    #[error("scenario lacks the revealing-preferred shape required here: {0}")]
    ShapeMismatch(String),

    #[error("exact enumeration exceeded the node budget of {budget} at period {period}; use a smaller horizon")]
    BudgetExceeded { budget: usize, period: usize },

    #[error("invalid rational literal `{0}`")]
    InvalidRational(String),
}

pub type Result<T> = std::result::Result<T, Error>;
