use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("color {color:?} at pixel ({x}, {y}) is not in the palette")]
    UnknownColor { color: [u8; 3], x: u32, y: u32 },

    #[error("class id {0} is not registered")]
    UnknownClass(u8),

    #[error("box {x_min},{y_min},{x_max},{y_max} is invalid for a {width}x{height} image")]
    BoxOutOfBounds {
        x_min: u32,
        y_min: u32,
        x_max: u32,
        y_max: u32,
        width: u32,
        height: u32,
    },

    #[error("normalized geometry out of range: {0}")]
    GeometryOutOfRange(String),

    #[error("instance {instance_id} maps to classes {first} and {second}")]
    InstanceClassConflict {
        instance_id: u16,
        first: u8,
        second: u8,
    },

    #[error("instance {0} is not present in the frame")]
    AbsentInstance(u16),

    #[error("need at least 2 samples in each axis, got {width}x{height}")]
    TooSmall { width: u32, height: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty frame stream")]
    EmptyStream,

    #[error("export class map has no entry for class {0}")]
    UnmappedClass(u8),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("matching group mixes frames or classes: {0}")]
    MixedGroup(String),

    #[error("dataset integrity check failed:\n{}", .0.join("\n"))]
    Integrity(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
