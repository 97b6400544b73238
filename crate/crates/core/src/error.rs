use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping of errors, stable enough to be matched by scripts and
/// mapped onto HTTP status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    InvalidInput,
    NotFound,
    Conflict,
    Io,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::InvalidInput => "invalid_argument",
            ErrorCategory::NotFound => "not_found",
            ErrorCategory::Conflict => "conflict",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mask dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("malformed RLE: {0}")]
    Rle(String),

    #[error("manifest {path}: {entry}: {reason}")]
    Manifest {
        path: PathBuf,
        entry: String,
        reason: String,
    },

    #[error("click ({x}, {y}) outside the {width}x{height} frame")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("click budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },

    #[error("session already accepted proposal {0}")]
    SessionAccepted(u32),

    #[error("proposal {id} is not in the current top-{k}")]
    NotInTopK { id: u32, k: usize },

    #[error("unknown proposal {0}")]
    UnknownProposal(u32),

    #[error("no clicks to undo")]
    EmptyHistory,

    #[error("no proposal pool for frame {0}")]
    MissingPool(usize),

    #[error("{0} not found")]
    NotFound(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidDimensions { .. }
            | Error::DimensionMismatch { .. }
            | Error::EmptyMask
            | Error::Rle(_)
            | Error::Manifest { .. }
            | Error::OutOfBounds { .. }
            | Error::InvalidInput(_)
            | Error::Json(_)
            | Error::Image(_) => ErrorCategory::InvalidInput,
            Error::UnknownProposal(_) | Error::MissingPool(_) | Error::NotFound(_) => {
                ErrorCategory::NotFound
            }
            Error::BudgetExhausted { .. }
            | Error::SessionAccepted(_)
            | Error::NotInTopK { .. }
            | Error::EmptyHistory => ErrorCategory::Conflict,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                ErrorCategory::NotFound
            }
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    /// Short machine-readable code, finer than [`ErrorCategory`].
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDimensions { .. } => "invalid_dimensions",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyMask => "empty_mask",
            Error::Rle(_) => "malformed_rle",
            Error::Manifest { .. } => "invalid_manifest",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::SessionAccepted(_) => "session_accepted",
            Error::NotInTopK { .. } => "not_in_top_k",
            Error::UnknownProposal(_) => "unknown_proposal",
            Error::EmptyHistory => "empty_history",
            Error::MissingPool(_) => "missing_pool",
            Error::NotFound(_) => "not_found",
            Error::InvalidInput(_) => "invalid_argument",
            Error::Io { .. } => "io",
            Error::Json(_) => "invalid_json",
            Error::Image(_) => "invalid_image",
        }
    }
}
