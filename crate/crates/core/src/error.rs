use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy not attained: {0}")]
    AccuracyNotAttained(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid spatial operator: {0}")]
    InvalidSpatial(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} outside solution span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },

    #[error("collocation system is singular for step width {width:e}")]
    SingularSystem { width: f64 },

    #[error("time stepping locked near t = {t}: {forced} consecutive forced minimal steps")]
    Locking { t: f64, forced: usize },

    #[error("restart budget of {0} exceeded during singularity detection")]
    RestartBudget(usize),

    #[error("subproblem {index} failed: {source}")]
    Subproblem {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
