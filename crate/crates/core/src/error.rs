use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid anchor set: {0}")]
    InvalidAnchors(String),

    #[error("data are linearly separable (coefficient norm {norm:.3}, divergence limit {limit}); the MLE does not exist")]
    Separable { norm: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate null variance ({0:e})")]
    DegenerateVariance(f64),

    #[error("large-sample approximation invalid (n*pi0*(1-pi0) = {0:.3} < 10); use the exact binomial test")]
    LargeSampleGuard(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("experiment cell failed: {0}")]
    CellFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Domain(_) => "domain",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::InvalidAnchors(_) => "invalid_anchors",
            Error::Separable { .. } => "separable",
            Error::Numerical(_) => "numerical",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::LargeSampleGuard(_) => "large_sample_guard",
            Error::Parse(_) => "parse",
            Error::CellFailed(_) => "cell_failed",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code for the command-line tool; distinct per kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 3,
            Error::Domain(_) => 4,
            Error::DimensionMismatch { .. } => 5,
            Error::InvalidDataset(_) => 6,
            Error::InvalidAnchors(_) => 7,
            Error::Separable { .. } => 8,
            Error::Numerical(_) => 9,
            Error::DegenerateVariance(_) => 10,
            Error::LargeSampleGuard(_) => 11,
            Error::Parse(_) => 12,
            Error::CellFailed(_) => 13,
            Error::Io(_) => 14,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
