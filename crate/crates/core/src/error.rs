use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested regime violates a feasibility precondition
    /// (e.g. signal at or below twice the bias floor).
    #[error("infeasible regime: {0}")]
    InfeasibleRegime(String),

    #[error("sample arity: {0}")]
    Arity(String),

    /// Rejection sampling consumed more base draws than the cap allows,
    /// which signals a mis-declared truncation mass.
    #[error("rejection cap exceeded: {0}")]
    RejectionCap(String),

    #[error("enumeration budget exceeded: {0}")]
    EnumerationBudget(String),

    #[error("zero survival mass under truncation rule")]
    ZeroSurvivalMass,

    /// Optimization did not converge within the iteration cap.
    /// Carries the best iterate found and its objective value.
    #[error("optimization did not converge (best objective {objective})")]
    Optimization {
        best: Vec<f64>,
        objective: f64,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
