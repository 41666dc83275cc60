use thiserror::Error;

use crate::divergences::DivergenceKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("value {value} at index {index} is not in {{-1, 0, 1}}")]
    OutOfZeroOneSet { index: usize, value: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("invalid divergence parameter: {0}")]
    InvalidKind(String),

    #[error("{kind} has no conjugate pair")]
    NoConjugatePair { kind: DivergenceKind },

    #[error("argument {z} outside the inverse-conjugate domain of {kind}")]
    OutsideDomain { kind: DivergenceKind, z: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty U-stratum {stratum} in cell (draw {draw}, row {row})")]
    EmptyStratum { draw: usize, row: usize, stratum: u8 },

    #[error("schema violation at {field}: {message}")]
    Schema { field: String, message: String },

    #[error("missing statistic: {0}")]
    MissingStatistic(String),

    #[error("bound not applicable: {0}")]
    NotApplicable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { field: field.into(), message: message.into() }
    }
}
