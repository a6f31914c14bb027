use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map them onto exit
/// codes without matching every case.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-integer dilation: doppler_shift * b_d / d_max = {0}")]
    NonIntegerDilation(f64),
    #[error("replica overflow: n_tx * dilation = {needed} exceeds b_d = {b_d}")]
    ReplicaOverflow { needed: usize, b_d: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("cell out of range: ({range}, {doppler})")]
    CellOutOfRange { range: usize, doppler: usize },
    #[error("cfar window of {window} cells exceeds map axis of {axis}")]
    WindowTooLarge { window: usize, axis: usize },
    #[error("invalid cfar parameters: {0}")]
    InvalidCfar(String),
    #[error("model spec inconsistent: {0}")]
    SpecInconsistent(String),
    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(f64),
    #[error("target outside field of view: {0}")]
    OutOfFieldOfView(String),
    #[error("f1 undefined when both AP and AR are zero")]
    BothZero,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::Format(_) => ErrorKind::Io,
            Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
