use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("all importance weights are zero at t={t}")]
    DegenerateWeights { t: usize },

    #[error("all simulation weights are zero at t={t}")]
    DegenerateSimulationWeights { t: usize },

    #[error("kernel backend `{backend}` cannot represent this density: {reason}")]
    BackendIncompatible { backend: &'static str, reason: String },

    #[error("kernel is not a non-increasing function of distance")]
    UnsupportedKernel,

    #[error("fast Gauss transform requires a gaussian kernel")]
    NonGaussianKernel,

    #[error("dimension {dim} exceeds the supported maximum of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid kernel-sum request: {0}")]
    InvalidRequest(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("ground truth is required for this computation")]
    MissingGroundTruth,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("step t={t}: {source}")]
    AtStep {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
