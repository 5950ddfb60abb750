use thiserror::Error;

/// Errors raised by the simulation and verification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside stored range [{t_min}, {t_max}]")]
    OutOfRange { t: f64, t_min: f64, t_max: f64 },

    #[error("shift {0} is not a node of the noise grid")]
    OffGrid(f64),

    #[error("insufficient history at t = {t}: need data back to {needed}, path starts at {available}")]
    InsufficientHistory { t: f64, needed: f64, available: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Picard iteration did not converge at t = {t} after {iterations} iterations (residual {residual:e}); reduce dt")]
    PicardDivergence { t: f64, iterations: usize, residual: f64 },

    #[error("condition ({condition}) violated: {detail}")]
    Condition { condition: &'static str, detail: String },

    #[error("history too shallow: relative tail {tail:e} exceeds {limit:e}")]
    ShallowHistory { tail: f64, limit: f64 },

    #[error("not absorbed: terminal norm {max_norm} exceeds rho + delta = {radius}")]
    NotAbsorbed { max_norm: f64, radius: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
