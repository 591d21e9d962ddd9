use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("insufficient blocks: {found} non-empty blocks for {folds} folds")]
    InsufficientBlocks { found: usize, folds: usize },

    #[error("unknown category `{label}` for {field}")]
    UnknownCategory { field: String, label: String },

    #[error("({x}, {y}) outside coverage of raster layer `{layer}`")]
    OutsideCoverage { x: f64, y: f64, layer: String },

    #[error("malformed AGS key `{0}`")]
    MalformedAgs(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable code used by the CLI error line and the service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidInput(_) => "invalid_input",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::Degenerate(_) => "degenerate",
            Error::InsufficientBlocks { .. } => "insufficient_blocks",
            Error::UnknownCategory { .. } => "unknown_category",
            Error::OutsideCoverage { .. } => "outside_coverage",
            Error::MalformedAgs(_) => "malformed_ags",
            Error::Parse { .. } => "parse_error",
            Error::Io { .. } => "io_error",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
