use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no particle pair matches distance mode {0:?}")]
    NoPair(crate::model::DistanceMode),

    #[error("non-finite state at step {step} (particle {particle}); dt is likely too large for epsilon")]
    NonFiniteState { step: usize, particle: usize },

    #[error("path {path}: {source}")]
    PathFailed {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("exact sampler requires dimension > 0, got {0}")]
    Dimension(f64),

    #[error("need at least two samples, got {0}")]
    Degenerate(usize),

    #[error("moment exponent {0} was not recorded during simulation")]
    UnrecordedAlpha(f64),

    #[error("time {0} is not on the recorded grid")]
    UnrecordedTime(f64),

    #[error("particles outside the grid domain: {0:?}")]
    OutOfDomain(Vec<usize>),

    #[error("CFL condition violated: dt * max|u| = {courant} exceeds {limit}")]
    Cfl { courant: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
