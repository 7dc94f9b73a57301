use std::io;
use std::path::PathBuf;

use lintra_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: unsupported pixel format {format} (need 8-bit grayscale or RGB)", path.display())]
    UnsupportedFormat { path: PathBuf, format: String },
    #[error("{}: image is {found}, expected {expected}", path.display())]
    MixedShapes {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: no images found", .0.display())]
    NoImages(PathBuf),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("model format {found} is not supported (expected {expected})")]
    VersionMismatch { expected: String, found: String },
    #[error("model file length: {0}")]
    Length(String),
    #[error("checksum mismatch in array `{0}`")]
    Checksum(String),
    #[error("model header: {0}")]
    Header(String),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    DataMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 usage, 3 algorithm failure, 4 data mismatch, 1 other.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 2,
            Error::DataMismatch(_) | Error::MixedShapes { .. } => 4,
            Error::Core(e) => match e {
                CoreError::InvalidShape { .. }
                | CoreError::RankOutOfRange { .. }
                | CoreError::EmptySplit { .. }
                | CoreError::InvalidTask(_) => 2,
                CoreError::DegenerateData
                | CoreError::NonFinite(_)
                | CoreError::TooFewBuddies { .. }
                | CoreError::RankDeficient
                | CoreError::NotOrthogonal(_) => 3,
                CoreError::DimensionMismatch { .. }
                | CoreError::ShapeMismatch { .. }
                | CoreError::IdCount { .. }
                | CoreError::IdMismatch { .. }
                | CoreError::InvalidPair { .. }
                | CoreError::EmptyPairing
                | CoreError::TooFewPairs(_)
                | CoreError::ImageTooSmall { .. } => 4,
                _ => 1,
            },
            _ => 1,
        }
    }
}
