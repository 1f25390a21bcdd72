use std::io;

use thiserror::Error;

/// Errors produced anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("sampler state error: {0}")]
    State(String),
    #[error("logic error: {0}")]
    Logic(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("series diverges or cannot be bounded at lambda = {lambda}: {reason}")]
    Divergence { lambda: f64, reason: String },
    #[error("truncation horizon exceeded ({terms} terms) at lambda = {lambda}")]
    Horizon { lambda: f64, terms: usize },
    #[error("no Malthusian parameter found: {0}")]
    NoMalthusian(String),
    #[error("theory consistency error: {0}")]
    TheoryConsistency(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
