use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cohort of {m} individuals exceeds the exact sampling limit {limit}")]
    CohortTooLarge { m: u64, limit: u64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("infinite intensity: {0}")]
    InfiniteIntensity(String),

    #[error("path has {count} breakpoints, limit is {limit}")]
    TooManyBreakpoints { count: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
