use std::fmt;

use thiserror::Error;

use crate::base::BaseFunction;

/// A point where a base function or its power is not defined.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainError {
    /// The argument lies outside the open domain of the base function.
    Base { base: BaseFunction, t: f64 },
    /// A non-integer power of a non-positive base value.
    FractionalPower { power: f64, value: f64 },
    /// A negative power of a zero base value.
    Pole { power: f64 },
    /// Power or argument is NaN or infinite.
    NonFinite { power: f64, t: f64 },
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::Base { base, t } => {
                write!(f, "{} is undefined at t = {}", base.tag(), t)
            }
            DomainError::FractionalPower { power, value } => {
                write!(f, "cannot raise base value {value} to non-integer power {power}")
            }
            DomainError::Pole { power } => {
                write!(f, "base value is zero and power {power} is negative")
            }
            DomainError::NonFinite { power, t } => {
                write!(f, "non-finite input (power = {power}, t = {t})")
            }
        }
    }
}

impl std::error::Error for DomainError {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FStressError {
    #[error("domain error: {0}")]
    Domain(#[from] DomainError),
    /// Domain failure for a specific pair of points (1-based, `i > j`).
    #[error("pair ({i}, {j}): {source}")]
    PairDomain {
        i: usize,
        j: usize,
        #[source]
        source: DomainError,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("order-{order} tensor over {dim} coordinates exceeds the size cap of {cap} coordinates")]
    SizeLimit { order: usize, dim: usize, cap: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("objective evaluation failed at {point:?}: {message}")]
    Evaluation { point: Vec<f64>, message: String },
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite {
        what: &'static str,
        iteration: usize,
        x: Vec<f64>,
    },
}

impl FStressError {
    /// The underlying domain error, if this is one.
    pub fn domain(&self) -> Option<&DomainError> {
        match self {
            FStressError::Domain(e) | FStressError::PairDomain { source: e, .. } => Some(e),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, FStressError>;
