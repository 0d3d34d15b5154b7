use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    #[error("missing tissue id(s) {ids:?}")]
    MissingTissue { ids: Vec<u8> },

    #[error("duplicate tissue id {0}")]
    DuplicateTissue(u8),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("resolution: {0}")]
    Resolution(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    PayloadSize { expected: usize, found: usize },

    #[error("bounds: {0}")]
    Bounds(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("placement: {0}")]
    Placement(String),

    #[error("numerical instability at step {step}")]
    Instability { step: usize },

    #[error("no steady state after {steps} steps (last relative change {last_change:.3e})")]
    Convergence { steps: usize, last_change: f64 },

    #[error("frequency {frequency} Hz outside recorded spectrum")]
    Range { frequency: f64 },

    #[error("mass: {0}")]
    Mass(String),

    #[error("classification: {0}")]
    Classification(String),

    #[error("compliance input: {0}")]
    ComplianceInput(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
