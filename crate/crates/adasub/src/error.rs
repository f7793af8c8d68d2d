//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("item {item} out of range (ground set has {total} items)")]
    InvalidItem { item: usize, total: usize },

    #[error("item {item} observed twice in a partial realization")]
    DuplicateObservation { item: usize },

    #[error("conditioning on a zero-probability partial realization")]
    NullConditioning,

    #[error("exact enumeration needs {needed} realizations but the cap is {cap}; raise the cap or switch to Monte Carlo")]
    EnumerationCapExceeded { needed: usize, cap: usize },

    #[error("policy-tree expansion exceeded the branch budget of {cap} nodes")]
    BranchCapExceeded { cap: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("policy attempted an infeasible selection of item {item} in round {round}")]
    InfeasibleSelection { item: usize, round: usize },

    #[error("invalid instance: {field}: {reason}")]
    InvalidInstance { field: String, reason: String },

    #[error("failed to parse instance file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn invalid_instance(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInstance {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
