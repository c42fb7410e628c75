use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim}: value {value} outside [{lo}, {hi}]")]
    OutOfBounds {
        dim: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("kernel index {index} out of range (n = {n})")]
    KernelIndex { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("internal shape error: {0}")]
    Shape(String),

    #[error("sampler diverged at iteration {iteration}: {reason}")]
    SamplerDivergence { iteration: usize, reason: String },

    #[error("ODE integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("unknown benchmark function '{0}'")]
    UnknownBenchmark(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
