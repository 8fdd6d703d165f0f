use thiserror::Error;

use crate::surrogate::FidelityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interaction list is empty")]
    EmptyInteractions,
    #[error("unknown user {0}")]
    UnknownUser(u64),
    #[error("unknown item {0}")]
    UnknownItem(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(
        "surrogate rejected: mean mse {:.3e}, top-k overlap {:.2}",
        .0.mean_mse,
        .0.topk_overlap
    )]
    SurrogateRejected(FidelityReport),
    #[error("item {0} is excluded from the candidate set")]
    NotACandidate(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// True for finite values above zero; NaN and infinities fail.
pub(crate) fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}
