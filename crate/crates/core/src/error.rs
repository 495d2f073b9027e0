use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point coincides with the projection point")]
    DegenerateProjection,

    #[error("invalid patch radius {0}")]
    InvalidRadius(f64),

    #[error("catalog has {found} stars after filtering, at least 3 are required")]
    EmptyCatalog { found: usize },

    #[error("scene has {found} stars, at least 3 are required")]
    TooFewStars { found: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported catalog version: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors a caller should report as bad input files.
    pub fn is_format(&self) -> bool {
        matches!(self, Error::Format(_) | Error::Version { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(e.to_string())
        }
    }
}
