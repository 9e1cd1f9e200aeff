use thiserror::Error;

pub type Result<T, E = FlowError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Parameters outside the regime where an operation is defined
    /// (e.g. sigma_p <= 0 for anything involving the pressure exponent).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("negative height {value} at index {index}")]
    NegativeHeight { index: usize, value: f64 },

    #[error("time step {dt:e} violates the CFL bound; suggested dt = {suggested:e}")]
    CflViolation { dt: f64, suggested: f64 },

    #[error("time {t} is past extinction at {extinction}")]
    PastExtinction { t: f64, extinction: f64 },

    #[error("root not bracketed at {location}")]
    RootNotBracketed { location: String },

    #[error("singular matrix at node {node} (condition estimate {condition:e})")]
    SingularMatrix { node: usize, condition: f64 },

    #[error("non-decreasing time derivative violated at {location}: {value}")]
    NonShrinking { location: String, value: f64 },

    #[error("insufficient samples: {usable} usable, {required} required")]
    InsufficientSamples { usable: usize, required: usize },

    #[error("schema mismatch at `{key}`: {detail}")]
    Schema { key: String, detail: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FlowError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FlowError::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FlowError::Domain(msg.into())
    }
}
