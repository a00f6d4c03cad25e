use crate::model::ArmId;
use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Q(s,1) - Q(s,0) has the same sign at both ends of the subsidy bracket.
    #[error(
        "non-indexable arm or bracket failure in state {state}: \
         Q-difference is {at_low} at lambda={low} and {at_high} at lambda={high}"
    )]
    BracketFailure {
        state: u8,
        low: f64,
        high: f64,
        at_low: f64,
        at_high: f64,
    },

    #[error("value iteration did not converge within {sweeps} sweeps (residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    #[error("whittle index failed for arm {arm}: {source}")]
    Arm {
        arm: ArmId,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid transition at row {row}: {message}")]
    InvalidTransition { row: usize, message: String },

    #[error("models missing passive cells for arms {0:?}")]
    MissingPassive(Vec<ArmId>),

    #[error(
        "cluster {cluster} has pooled active support {support} < {min_support} \
         for state {state}; try fewer clusters"
    )]
    UnresolvableCell {
        cluster: usize,
        state: u8,
        support: u64,
        min_support: u64,
    },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Schema {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
