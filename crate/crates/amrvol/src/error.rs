//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by dataset handling, volume IO, and rendering.
///
/// Variants split into two families: data that fails its invariants
/// ([`Error::Validation`] and friends) and bytes that cannot be read or
/// written ([`Error::Io`], [`Error::Format`]). The CLI maps the first
/// family to exit code 1 and the second to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A dataset, volume, or configuration violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A world point fell outside the dataset's domain.
    #[error("point ({0}, {1}, {2}) is outside the domain")]
    OutsideDomain(f64, f64, f64),

    /// A requested feature is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An allocation would exceed addressable size.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Voxel size underflowed the usable floating-point range.
    #[error("voxel size {size:e} at level {level} is below 1e-12; apply a larger scale multiplier")]
    Precision { level: usize, size: f64 },

    /// Volume pairs whose world transforms disagree.
    #[error("alignment failure at level {level}, index {index:?}: deviation {deviation:e}")]
    Misaligned {
        level: usize,
        index: [i64; 3],
        deviation: f64,
    },

    /// Filesystem error with the offending path attached.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed bytes in a binary or JSON payload.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for errors caused by invalid data rather than unreadable bytes.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
