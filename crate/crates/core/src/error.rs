use thiserror::Error;

/// Errors raised by the toolkit.
///
/// `ModelRejected`-class variants (see [`Error::is_model_rejection`]) mean the
/// input does not describe a pointed manifold with a single cut point at
/// distance pi; everything else is a usage or numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("model rejected: {0}")]
    ModelRejected(String),

    #[error("conjugate point at pi: direction u={u:?}, x={x:?} (smallest |Df(pi)| = {value:e})")]
    ConjugatePoint {
        u: Vec<f64>,
        x: Vec<f64>,
        value: f64,
    },

    #[error("step size underflow at t={t} (h={h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("shooting did not converge: {0}")]
    ShootingFailed(String),

    #[error("matrix is not orthogonal: max |Q^T Q - I| = {0:e}")]
    NotOrthogonal(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_model_rejection(&self) -> bool {
        matches!(
            self,
            Error::InvalidProfile(_) | Error::ModelRejected(_) | Error::ConjugatePoint { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
