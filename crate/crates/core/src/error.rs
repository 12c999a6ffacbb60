use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("point lies at or beyond 90 degrees from the projection center")]
    OutsideHemisphere,

    #[error("invalid field of view {0}x{1} degrees, expected each in (0, 180)")]
    InvalidFieldOfView(f64, f64),

    #[error("invalid transition step ({0}, {1})")]
    InvalidStep(f64, f64),

    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image is {width}x{height}, equirectangular input needs width = 2 x height")]
    Aspect { width: u32, height: u32 },

    #[error("viewport size {width}x{height} is not divisible by 4")]
    IndivisibleSize { width: u32, height: u32 },

    #[error("invalid viewport size {0}x{1}")]
    InvalidViewportSize(u32, u32),

    #[error("entropy of an empty patch is undefined")]
    EmptyPatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("recurrence threshold must be positive, got {0}")]
    InvalidThreshold(f64),

    #[error("human baseline needs at least 2 reference paths, got {0}")]
    TooFewPaths(usize),

    #[error("scanpath must contain at least one point")]
    EmptyScanpath,

    #[error("empty input")]
    EmptyInput,

    #[error("schema mismatch in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to encode image {path}: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Schema {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// True for failures of the filesystem rather than of the input data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Encode { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
