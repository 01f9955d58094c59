use thiserror::Error;

/// Errors produced anywhere in the benchmark pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("contemporaneous dependencies contain a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("backward called before forward")]
    NoForwardPass,
    #[error("design matrix is rank deficient: column `{0}` is collinear with earlier columns")]
    Collinear(String),
    #[error("lagged regressors need time-ordered data (pass force_order to override)")]
    NotTimeIndexed,
    #[error("ICA did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence {
        iterations: usize,
        last_change: f64,
        trace: Vec<f64>,
    },
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
    #[error("graph error: {0}")]
    Graph(String),
    #[error("no complete runs to aggregate")]
    NoCompleteRuns,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
