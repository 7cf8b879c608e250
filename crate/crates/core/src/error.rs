use std::path::PathBuf;

/// Errors produced by the core image primitives.
///
/// The CLI maps these onto its exit-code contract: decode/parse/dimension
/// problems are data errors (exit 2), non-finite numerics are numeric
/// failures (exit 3).
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png decode failed: {0}")]
    Decode(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error in {what} (line {line}): {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(what: &'static str, line: usize, msg: impl Into<String>) -> Self {
        CoreError::Parse {
            what,
            line,
            msg: msg.into(),
        }
    }
}
