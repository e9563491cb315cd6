//! Error taxonomy for the whole pipeline.
//!
//! Every fallible operation returns [`FsgResult`]. Variants are grouped by
//! failure class rather than by module so callers (CLI, tests) can map them
//! to exit codes and messages uniformly: user-facing parameter problems,
//! data/shape problems, file-format problems, and internal invariant
//! violations are all distinguishable.

use thiserror::Error;

/// Crate-wide result alias.
pub type FsgResult<T> = Result<T, FsgError>;

#[derive(Debug, Error)]
pub enum FsgError {
    /// A tensor/image axis disagrees with what the operation requires.
    /// Always names the offending axis so shape bugs are diagnosable.
    #[error("dimension mismatch on {axis}: expected {expected}, got {got}{}",
            context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Dimension {
        axis: &'static str,
        expected: String,
        got: String,
        context: Option<String>,
    },

    /// A scalar parameter is outside its documented domain.
    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Dataset-level problem: empty set, too few samples, bad sample.
    #[error("data error: {0}")]
    Data(String),

    /// A grasp label is inconsistent with its image (e.g. out of bounds).
    #[error("label error for grasp {grasp_index}: {reason}")]
    Label { grasp_index: usize, reason: String },

    /// Configuration is self-contradictory or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// Geometric precondition violated (non-positive depth, tilted camera
    /// beyond the supported range, degenerate transform).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Scene generation could not satisfy its constraints after bounded retries.
    #[error("scene generation failed: {0}")]
    Generation(String),

    /// Checkpoint file does not start with the expected magic bytes.
    #[error("checkpoint has bad magic bytes (not a checkpoint file?)")]
    CheckpointBadMagic,

    /// Checkpoint file ends before the manifest-declared payload does.
    #[error("checkpoint truncated: expected {expected} bytes of tensor data, file holds {got}")]
    CheckpointTruncated { expected: usize, got: usize },

    /// Checkpoint manifest disagrees with the network being loaded.
    #[error("checkpoint shape mismatch at layer {layer}/{tensor}: manifest says {manifest:?}, network wants {wanted:?}")]
    CheckpointShape {
        layer: String,
        tensor: String,
        manifest: Vec<usize>,
        wanted: Vec<usize>,
    },

    /// Malformed structured file (JSON metadata, config file, PNG layout).
    #[error("format error in {what}: {reason}")]
    Format { what: String, reason: String },

    /// A numeric op produced NaN/Inf — treated as a hard error state.
    #[error("non-finite value produced by {op} (NaN or Inf in output)")]
    NonFinite { op: &'static str },

    /// An internal invariant that should be unreachable was violated.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
}

impl FsgError {
    /// Shorthand for the ubiquitous dimension-mismatch construction.
    pub fn dim(axis: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        FsgError::Dimension {
            axis,
            expected: expected.to_string(),
            got: got.to_string(),
            context: None,
        }
    }

    /// Dimension mismatch with an extra human-oriented context note.
    pub fn dim_ctx(
        axis: &'static str,
        expected: impl ToString,
        got: impl ToString,
        context: impl ToString,
    ) -> Self {
        FsgError::Dimension {
            axis,
            expected: expected.to_string(),
            got: got.to_string(),
            context: Some(context.to_string()),
        }
    }

    pub fn param(name: &'static str, reason: impl ToString) -> Self {
        FsgError::Parameter {
            name,
            reason: reason.to_string(),
        }
    }

    pub fn io(path: impl ToString, source: std::io::Error) -> Self {
        FsgError::Io {
            path: path.to_string(),
            source,
        }
    }

    pub fn format(what: impl ToString, reason: impl ToString) -> Self {
        FsgError::Format {
            what: what.to_string(),
            reason: reason.to_string(),
        }
    }
}
