use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("latent point {0} is outside the model domain")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("edge probability {0} exceeds 1 (alpha_n * w too large)")]
    InvalidProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("search budget must be positive")]
    ZeroBudget,

    #[error("experiment degenerate: {0}")]
    DegenerateExperiment(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
