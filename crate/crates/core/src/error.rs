use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("subsystem `{0}` has zero dimension")]
    ZeroDimension(String),
    #[error("empty subsystem list")]
    EmptySpace,
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operators act on different Hilbert spaces")]
    SpaceMismatch,
    #[error("channel tag `{0}` not found")]
    TagNotFound(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("channel `{0}` raises the excitation number")]
    ExcitationRaising(String),
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("trace drift {drift:.3e} exceeds limit at t = {t}; reduce the step size")]
    TraceDrift { t: f64, drift: f64 },
    #[error("final time too short: {0}")]
    InsufficientTime(String),
    #[error("zero efficiency; jitter undefined")]
    ZeroEfficiency,
    #[error("{formula}: {reason}")]
    Domain { formula: &'static str, reason: String },
    #[error("threshold {0} never reached on the scan grid")]
    ThresholdNotReached(f64),
    #[error("resource guard: {0}")]
    ResourceGuard(String),
    #[error("mismatched configurations: {0}")]
    Mismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(formula: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { formula, reason: reason.into() }
    }
}
