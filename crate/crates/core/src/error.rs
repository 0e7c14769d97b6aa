use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    #[error("user {0} is not connected to any relay")]
    OrphanUser(usize),
    #[error("user {user} listed twice for relay {relay}")]
    DuplicateUser { relay: usize, user: usize },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inconsistent plan: {0}")]
    InconsistentPlan(String),
    #[error("concrete length {b} is not a multiple of the required unit {unit}")]
    ConcreteLength { b: u64, unit: i128 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
