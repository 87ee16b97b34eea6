//! Error types shared across the pipeline.

use thiserror::Error;

/// Errors from reading raw trajectory text.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected 4 whitespace-separated values, found {found}")]
    Arity { line: usize, found: usize },
    #[error("line {line}: {field} is not numeric: {value:?}")]
    NotNumeric {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {field} must be a non-negative integer, got {value}")]
    NotInteger {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: duplicate record for frame {frame} agent {agent}")]
    Duplicate { line: usize, frame: i64, agent: i64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Structural problems in otherwise parseable data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("frame {frame} of agent {agent} is off the inferred stride grid (stride {stride}, offset {offset})")]
    StrideMismatch {
        agent: i64,
        frame: i64,
        stride: i64,
        offset: i64,
    },
    #[error("missing annotation for ego {ego} at step {step}")]
    MissingAnnotation { ego: i64, step: i64 },
    #[error("scenes are not a matching original/corrupted pair: {0}")]
    MismatchedScenes(String),
    #[error("covariance estimation needs at least {needed} residuals, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("track lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("schema version mismatch: artifact has {found:?}, expected {expected:?}")]
    SchemaMismatch { found: String, expected: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
}

/// Invalid run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("observation covariance is not positive semi-definite")]
    NonPsdObservation,
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Toml {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

/// Top-level error for pipeline entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
