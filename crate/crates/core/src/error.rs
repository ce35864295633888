//! Error taxonomy shared by every module.
//!
//! Four failure classes are distinguished so callers can react differently:
//! domain errors (caller passed an argument outside the documented domain),
//! resource errors (a search volume or candidate budget would be exceeded;
//! the message names a feasible retry where one exists), cache errors
//! (stored artifacts fail validation and must be recomputed), and data
//! errors (an internal consistency check failed, e.g. an overflow guard).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    pub fn cache(msg: impl Into<String>) -> Self {
        Error::Cache(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
