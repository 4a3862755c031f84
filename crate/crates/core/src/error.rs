use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error in layer {layer}: {message}")]
    Validation { layer: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("path explosion: more than {cap} regions between {z_min} and {z_max}")]
    PathExplosion { cap: usize, z_min: f64, z_max: f64 },

    #[error("degenerate truncation region: {0}")]
    DegenerateRegion(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
