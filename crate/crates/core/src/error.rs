use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("non-finite values in {layer}")]
    Numeric { layer: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("incompatible checkpoint: tensor `{tensor}` {detail}")]
    IncompatibleCheckpoint { tensor: String, detail: String },

    #[error("config error in {file}:{line}: key `{key}`: {msg}")]
    Config {
        key: String,
        file: String,
        line: usize,
        msg: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
