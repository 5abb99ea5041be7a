use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("scene has no valid points")]
    EmptyScene,

    #[error("degenerate scene: every bounding-box extent is zero")]
    DegenerateScene,

    #[error("point ({x}, {y}, {z}) lies outside the scene bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("coverage instance has no frame sets")]
    EmptyInstance,

    #[error("exhaustive search over {combinations} subsets exceeds the limit of {limit}")]
    InstanceTooLarge { combinations: u128, limit: u128 },

    #[error("advantage group needs at least 2 rewards, got {0}")]
    InvalidGroup(usize),

    #[error("prediction/ground-truth mismatch: missing {missing:?}, duplicate {duplicate:?}, unknown {unknown:?}")]
    ManifestMismatch {
        missing: Vec<String>,
        duplicate: Vec<String>,
        unknown: Vec<String>,
    },

    #[error("invalid reward record: {0}")]
    InvalidRecord(String),

    #[error("room needs at least 3 floor points, got {0}")]
    DegenerateRoom(usize),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable name, used in CLI error reports and FFI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyScene => "empty_scene",
            Error::DegenerateScene => "degenerate_scene",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::EmptyInstance => "empty_instance",
            Error::InstanceTooLarge { .. } => "instance_too_large",
            Error::InvalidGroup(_) => "invalid_group",
            Error::ManifestMismatch { .. } => "manifest_mismatch",
            Error::InvalidRecord(_) => "invalid_record",
            Error::DegenerateRoom(_) => "degenerate_room",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Json(_) => "json",
        }
    }
}
