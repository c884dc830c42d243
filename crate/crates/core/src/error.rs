use std::path::PathBuf;

use thiserror::Error;

use crate::market_math::OptionKind;

/// Errors produced anywhere in the hedging toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: expected column `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("shape error at layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular least-squares design (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("checkpoint format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("option kind mismatch: model is {found}, requested {expected}")]
    KindMismatch {
        expected: OptionKind,
        found: OptionKind,
    },

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
