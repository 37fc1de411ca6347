use thiserror::Error;

use crate::multilinear::VarTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain violation for {family}: {constraint}")]
    ParameterDomain { family: String, constraint: String },

    #[error("invalid tableau: {0}")]
    InvalidTableau(String),

    #[error(
        "{vars} variables exceed the vertex enumeration limit of {limit}; \
         use randomized vertex sampling for an (uncertified) upper bound"
    )]
    Capacity { vars: usize, limit: usize },

    #[error("no value supplied for variable {0}")]
    MissingVariable(VarTag),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("limiter contract violated: q[{index}] = {value} < 0")]
    LimiterContract { index: usize, value: String },

    #[error("no positive step size certified (gamma = 0)")]
    NoPositiveStep,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
