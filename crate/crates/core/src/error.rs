use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command-line front end to pick an exit
/// status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Simulation,
    Analysis,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("observable is not Hermitian (max deviation {deviation:.3e})")]
    InvalidObservable { deviation: f64 },

    #[error("polarization ket is not normalized (norm² = {norm_sqr})")]
    InvalidKet { norm_sqr: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("protection projection is degenerate (survival probability {survival:.3e})")]
    DegenerateProjection { survival: f64 },

    #[error("gaussian fit failed on grid `{grid}`: {reason}")]
    FitFailure { grid: String, reason: String },

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("tomography is under-determined: {0}")]
    UnderDetermined(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed counts grid: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } => ErrorClass::Config,
            Error::FitFailure { .. }
            | Error::NoSignal(_)
            | Error::DegenerateCalibration(_)
            | Error::UnderDetermined(_)
            | Error::GridFormat(_) => ErrorClass::Analysis,
            _ => ErrorClass::Simulation,
        }
    }
}
