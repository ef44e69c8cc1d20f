use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("stratum {0} received no samples")]
    EmptyStratum(usize),

    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),

    #[error("rejection acceptance rate {rate:e} is too low; use an analytic decomposition of the region")]
    LowAcceptance { rate: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("performance function returned NaN at {0:?}")]
    NanResponse(Vec<f64>),

    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
