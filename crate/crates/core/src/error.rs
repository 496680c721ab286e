use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid game: {}", .0.join("; "))]
    InvalidGame(Vec<String>),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("unknown resource id {0:?}")]
    UnknownResource(String),

    #[error("unknown agent id {0:?}")]
    UnknownAgent(String),

    #[error("invalid distribution rule: {0}")]
    InvalidRule(String),

    #[error("rule defined for k={k} evaluated at {count} co-located agents")]
    RuleUndefined { k: usize, count: usize },

    #[error("alpha={alpha} is infeasible for k={k}: {reason}")]
    Infeasible { alpha: String, k: usize, reason: String },

    #[error("alpha={alpha} outside (0, {max}] for k={k}")]
    AlphaOutOfRange { alpha: String, max: String, k: usize },

    #[error("profile space has {required} profiles, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("pruned search exceeded its budget of {0} nodes")]
    SearchBudget(u64),

    #[error("best-response dynamics did not terminate within {0} steps")]
    MaxStepsExceeded(usize),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    #[error("invalid instance parameters: {0}")]
    InvalidParameters(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
