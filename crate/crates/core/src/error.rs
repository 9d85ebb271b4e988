use thiserror::Error;

/// Errors raised by the phase-dynamics engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The conditional distribution has zero total weight, i.e. the history is impossible.
    #[error("distribution annihilated: {0}")]
    Annihilated(String),

    #[error("enumeration budget exceeded: {count} compositions > {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("insufficient N_max: {n_max} < required {required}")]
    InsufficientTruncation { n_max: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no distinct peak: the phase marginal is flat")]
    NoDistinctPeak,
}

pub type Result<T> = std::result::Result<T, Error>;
