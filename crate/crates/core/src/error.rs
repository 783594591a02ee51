use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("field has a pole at the origin")]
    PoleAtOrigin,
    #[error("stencil point {point:?} leaves the domain of the field")]
    DomainViolation { point: [f64; 4] },
    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: [f64; 4] },
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("frame requested at the origin, where the fibration degenerates")]
    OriginFrame,
    #[error("non-finite sample at radius {radius}")]
    NonFinite { radius: f64 },
    #[error("decay fit needs at least {needed} samples spanning a decade, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter search failed, best margin {best_margin:e}")]
    SearchFailed { best_margin: f64 },
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
