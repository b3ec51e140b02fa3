use thiserror::Error;

/// Errors raised by the numeric modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("azimuth undefined at elevation +-pi/2")]
    SingularAzimuth,
    #[error("Fisher information matrix is singular (det = {det:e})")]
    SingularFim { det: f64 },
    #[error("inconsistent measurement batch: {0}")]
    InconsistentBatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = NavError> = std::result::Result<T, E>;
