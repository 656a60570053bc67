use thiserror::Error;

use crate::manifold::Family;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no two-point homogeneous space {family:?} of dimension {d}")]
    InvalidSpace { family: Family, d: u32 },

    #[error("degree {degree} is not an admissible degree of {family:?}")]
    DegreeNotInLambda { family: Family, degree: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point sampling is not available on {0:?}")]
    UnsupportedFamily(Family),

    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("series did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
