use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("component {component} out of range for dimension {dim}")]
    ComponentOutOfRange { component: usize, dim: usize },

    #[error("mark dimension mismatch: expected {expected}, got {got}")]
    MarkDimension { expected: usize, got: usize },

    #[error("mark is not on the simplex: {0}")]
    OffSimplex(String),

    #[error("model is not stable: spectral radius {0} >= 1")]
    Unstable(f64),

    #[error("spectral radius did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("expected event count {expected:.3e} exceeds the configured cap {cap:.3e}")]
    ResourceLimit { expected: f64, cap: f64 },

    #[error("negative intensity {value} for component {component} at t = {time}")]
    NegativeIntensity { component: usize, time: f64, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("event log: {0}")]
    EventLog(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unstable(_)
                | Error::NoConvergence(_)
                | Error::ResourceLimit { .. }
                | Error::NegativeIntensity { .. }
                | Error::Optimizer(_)
        )
    }

    /// Copy of the error for reporting it more than once. I/O and JSON
    /// errors keep their message but not their source.
    pub fn duplicate(&self) -> Error {
        match self {
            Error::InvalidParams(s) => Error::InvalidParams(s.clone()),
            Error::InvalidArgument(s) => Error::InvalidArgument(s.clone()),
            Error::ComponentOutOfRange { component, dim } => {
                Error::ComponentOutOfRange { component: *component, dim: *dim }
            }
            Error::MarkDimension { expected, got } => Error::MarkDimension { expected: *expected, got: *got },
            Error::OffSimplex(s) => Error::OffSimplex(s.clone()),
            Error::Unstable(r) => Error::Unstable(*r),
            Error::NoConvergence(n) => Error::NoConvergence(*n),
            Error::ResourceLimit { expected, cap } => Error::ResourceLimit { expected: *expected, cap: *cap },
            Error::NegativeIntensity { component, time, value } => {
                Error::NegativeIntensity { component: *component, time: *time, value: *value }
            }
            Error::Unsupported(s) => Error::Unsupported(s.clone()),
            Error::EventLog(s) => Error::EventLog(s.clone()),
            Error::Optimizer(s) => Error::Optimizer(s.clone()),
            Error::Config(s) => Error::Config(s.clone()),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), e.to_string())),
            Error::Json(e) => Error::Config(e.to_string()),
        }
    }
}
