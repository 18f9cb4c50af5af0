use std::path::PathBuf;

/// Errors produced across the frontend, training and reporting layers.
#[derive(Debug, thiserror::Error)]
pub enum LeafError {
    #[error("malformed audio file: {0}")]
    Format(String),

    #[error("unsupported audio encoding: {0}")]
    Unsupported(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("input of {len} samples is shorter than the kernel width {kernel_width}")]
    InputTooShort { len: usize, kernel_width: usize },

    #[error("non-finite value encountered in stage `{stage}`")]
    Numerics { stage: &'static str },

    #[error("support violation: {0}")]
    Support(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LeafError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LeafError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for validation failures, 2 for
    /// runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LeafError::Io { .. } | LeafError::Numerics { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LeafError>;
