use thiserror::Error;

/// Errors raised by the geometry, sampling and experiment code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point {re}+{im}i: must be finite with positive imaginary part")]
    InvalidPoint { re: f64, im: f64 },

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("classification error: expected {expected}, found {found}")]
    Classification { expected: &'static str, found: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("point reduction did not converge after {iterations} iterations")]
    ReductionFailure { iterations: usize },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("word tracking error: {0}")]
    Tracking(String),

    #[error("chain error: {0}")]
    Chain(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPoint { .. } => "invalid_point",
            Error::InvalidElement(_) => "invalid_element",
            Error::Classification { .. } => "classification",
            Error::Degenerate(_) => "degenerate",
            Error::ReductionFailure { .. } => "reduction_failure",
            Error::Resource(_) => "resource",
            Error::Sampler(_) => "sampler",
            Error::Tracking(_) => "tracking",
            Error::Chain(_) => "chain",
            Error::Domain(_) => "domain",
            Error::Estimator(_) => "estimator",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
