use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("dimension {d} is recurrent; escape-based quantities need d >= 3")]
    RecurrentDimension { d: usize },

    #[error("subcritical infection rate: h_lambda = {h_lambda} <= 0 (threshold {threshold})")]
    Subcritical { h_lambda: f64, threshold: f64 },

    #[error("initial law has negative support: {0}")]
    NegativeSupport(String),

    #[error("site value overflow at site {site}: {value:e} exceeds 1e300 (time {time})")]
    Overflow { site: usize, value: f64, time: f64 },

    #[error("target time {target} precedes current time {current}")]
    TimeReversal { target: f64, current: f64 },

    #[error("truncation did not converge: boundary mass {boundary_mass:e} at radius {radius}")]
    Truncation { boundary_mass: f64, radius: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("coupling chain diverges: {0}")]
    ChainDivergence(String),

    #[error("cannot pool reports: {0}")]
    ReportMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
