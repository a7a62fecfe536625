use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step size {0} is outside [0, 1]")]
    InvalidStepSize(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid feasible set: {0}")]
    InvalidSet(String),

    #[error("point is not feasible (constraint residual {residual:e} > {tol:e})")]
    Infeasible { residual: f64, tol: f64 },

    #[error("client {client}: feasible set does not contain the global set ({detail})")]
    Containment { client: usize, detail: String },

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("dataset {path}: line {line}: {msg}")]
    DatasetParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid synthetic data spec: {0}")]
    InvalidSynthetic(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("NaN or infinity in client {client} iterate at round {round}")]
    Diverged { round: usize, client: usize },

    #[error("verification failed at round {round}: {what}")]
    Verification { round: usize, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
