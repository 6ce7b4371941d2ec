use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("all weights are zero")]
    DegenerateDistribution,
    #[error("group budget of {budget} exceeded at depth k = {depth} ({needed} slots needed)")]
    BudgetExceeded { depth: usize, budget: usize, needed: usize },
    #[error("inconclusive scan: {0}")]
    InconclusiveScan(String),
    #[error("no bracketing interval: {0}")]
    NoBracket(String),
    #[error("curve is not unimodal on the search window: {0}")]
    NotUnimodal(String),
    #[error("fit is underdetermined: {0}")]
    Underdetermined(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
