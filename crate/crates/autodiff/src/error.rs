#[derive(Debug, thiserror::Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {msg}")]
    Shape { op: &'static str, msg: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("invalid parameter for {op}: {msg}")]
    Parameter { op: &'static str, msg: String },

    #[error("parse error in {what} (line {line}): {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AdError {
    pub fn shape(op: &'static str, msg: impl Into<String>) -> Self {
        AdError::Shape {
            op,
            msg: msg.into(),
        }
    }

    pub fn parameter(op: &'static str, msg: impl Into<String>) -> Self {
        AdError::Parameter {
            op,
            msg: msg.into(),
        }
    }
}
