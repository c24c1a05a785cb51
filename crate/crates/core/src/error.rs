use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidHilbert(String),

    #[error("operation needs {expected} internal levels, space has {found}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical abort at t = {time:.6e} s: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("trace increased by {increase:.3e} at t = {time:.6e} s under no-detection propagation")]
    TraceIncrease { time: f64, increase: f64 },

    #[error("generator has no detected channels")]
    NoDetectedChannels,

    #[error("post-jump state undefined: detection rate is zero")]
    UndefinedPostJump,

    #[error("time grids of trajectory records do not match")]
    GridMismatch,

    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("degenerate design matrix in error-model fit")]
    DegenerateFit,
}
