use thiserror::Error;

use crate::exprdsl::{EvalError, ParseError};

/// Crate-wide error type. Geometry operations report the offending point or
/// node so a failing scenario can be localized.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },

    #[error("grid needs at least {needed} points per axis, axis {axis} has {got}")]
    GridTooSmall {
        axis: usize,
        got: usize,
        needed: usize,
    },

    #[error("map Jacobian is rank deficient at node {node:?}")]
    RankDeficient { node: Vec<usize> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integration blew up (|x| > {limit:e}) at node {node:?}")]
    BlowUp { node: Vec<usize>, limit: f64 },

    #[error("scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn scenario(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            message: message.into(),
        }
    }
}
