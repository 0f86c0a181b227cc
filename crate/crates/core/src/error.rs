use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no estimate case covers {0}")]
    NoCase(String),

    #[error("budget exceeded for {what}: needs {needed}, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("cube center is the origin; slab direction undefined")]
    DegenerateCenter,

    #[error("modes are not orthogonal: {0}")]
    NonOrthogonal(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no admissible Strichartz triple in the search grid")]
    NoAdmissibleTriple,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
