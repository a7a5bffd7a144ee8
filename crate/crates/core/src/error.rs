use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An input parameter lies outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inputs whose shapes do not line up (e.g. an assignment sized for a
    /// different instance).
    #[error("structural mismatch: {0}")]
    Structure(String),

    /// Some node has no eligible master within range, so no feasible
    /// clustering exists. Carries the 1-based node id.
    #[error("infeasible model: node {node} cannot be covered by any eligible master")]
    Infeasible { node: usize },

    /// Exhaustive enumeration refused because the instance is too large.
    #[error("instance too large for exhaustive search: n = {n}, limit = {limit}")]
    TooLarge { n: usize, limit: usize },

    /// Ratio with a zero denominator.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// Energy parameter fit could not be computed or was rejected.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// LP text could not be parsed.
    #[error("LP parse error at line {line}: {msg}")]
    LpParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
