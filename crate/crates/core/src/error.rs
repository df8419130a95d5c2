use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid explore configuration (n = {n}, L = {explore_slots}, K = {slots}, N = {bidders}): {reason}")]
    InvalidConfig {
        n: usize,
        explore_slots: usize,
        slots: usize,
        bidders: usize,
        reason: &'static str,
    },

    #[error("ranking weight for bidder {index} must be positive, got {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },

    #[error("{what} has length {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("zero denominator: {what} at index {index}")]
    ZeroDenominator { what: &'static str, index: usize },

    #[error("parameter {name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{0}")]
    Unsupported(&'static str),
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::OutOfRange { name, value, expected }
    }
}
