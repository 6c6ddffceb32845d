use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("method `{method}` does not support derivative order {order}")]
    UnsupportedOrder { method: &'static str, order: usize },

    #[error("least-squares system is rank deficient")]
    RankDeficient,

    #[error("spectrum is not conjugate-symmetric (max deviation {0:e})")]
    AsymmetricSpectrum(f64),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("total-variation objective increased at iteration {iteration}: {previous} -> {current}")]
    ObjectiveIncreased {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("linear system is singular")]
    Singular,

    #[error("candidate library error: {0}")]
    Library(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
