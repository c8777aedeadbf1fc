use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid task family: {0}")]
    InvalidFamily(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular linear system in {0}")]
    Singular(&'static str),
    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("non-finite value in layer {layer}: {what}")]
    NonFinite { layer: usize, what: String },
    #[error("non-finite gradient at index {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("environment: {0}")]
    Env(String),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("config: {0}")]
    Config(String),
    #[error("format: {0}")]
    Format(String),
    #[error("agent {agent}: numerical failure: {what}")]
    Numerical { agent: usize, what: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
