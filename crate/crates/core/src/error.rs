use thiserror::Error;

/// Partial state of a reverse-channel-coding search that ran out of budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub candidates_examined: u64,
    pub best_index: u64,
    pub best_score: f64,
    pub arrival_time: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("candidate budget of {budget} exceeded (best index {}, after {} candidates)", .state.best_index, .state.candidates_examined)]
    BudgetExceeded { budget: u64, state: SearchState },

    #[error("index {0} outside the representable range")]
    Range(u64),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite score at t = {t} (z = {z:?})")]
    NonFiniteScore { z: Vec<f64>, t: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
