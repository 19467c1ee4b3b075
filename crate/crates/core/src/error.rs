use thiserror::Error;

/// Errors raised by the model, reconstruction and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation dimension {0} (need at least {1})")]
    InvalidDimension(usize, usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("heralding branch has zero probability ({0})")]
    EmptyBranch(String),

    #[error("loss inversion is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("inconsistent loss budget: total loss {total} is below corrected loss {corrected}")]
    InconsistentBudget { total: f64, corrected: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
