use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("stream ended inside frame {frame}: {found} of {expected} bytes")]
    TruncatedFrame { frame: usize, expected: usize, found: usize },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: box [{x1},{y1},{x2},{y2}] has non-positive area")]
    NegativeArea { path: PathBuf, line: usize, x1: i64, y1: i64, x2: i64, y2: i64 },
    #[error("{path}:{line}: interval {start}-{end} overlaps an earlier interval")]
    OverlappingIntervals { path: PathBuf, line: usize, start: usize, end: usize },
    #[error("interval {start}-{end} exceeds the {frame_count}-frame video")]
    IntervalOutOfRange { start: usize, end: usize, frame_count: usize },
    #[error("detection on frame {frame} but the video has {frame_count} frames")]
    DetectionOutOfRange { frame: usize, frame_count: usize },
    #[error("{0}: missing JSON sidecar")]
    SidecarMissing(PathBuf),
    #[error("{path}: checksum {found:016x} does not match recorded {expected:016x}")]
    ChecksumMismatch { path: PathBuf, expected: u64, found: u64 },
    #[error("{path}: recorded counts {recorded} disagree with entries {actual}")]
    CountMismatch { path: PathBuf, recorded: String, actual: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("corpus missing: {0}")]
    CorpusMissing(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: tubeforge_core::Error,
    },
}

/// Coarse class of an error, printed as a machine-readable code by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Ingest,
    Config,
    Io,
    Format,
}

impl Category {
    pub fn code(&self) -> &'static str {
        match self {
            Category::Ingest => "E_INGEST",
            Category::Config => "E_CONFIG",
            Category::Io => "E_IO",
            Category::Format => "E_FORMAT",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Ingest => 3,
            Category::Io => 4,
            Category::Format => 5,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn core(context: impl Into<String>, source: tubeforge_core::Error) -> Self {
        Error::Core { context: context.into(), source }
    }

    pub fn category(&self) -> Category {
        use tubeforge_core::Error as C;
        match self {
            Error::Io { .. } | Error::CorpusMissing(_) => Category::Io,
            Error::TruncatedFrame { .. }
            | Error::Parse { .. }
            | Error::NegativeArea { .. }
            | Error::OverlappingIntervals { .. } => Category::Ingest,
            Error::IntervalOutOfRange { .. } | Error::DetectionOutOfRange { .. } | Error::Config(_) => {
                Category::Config
            }
            Error::SidecarMissing(_)
            | Error::ChecksumMismatch { .. }
            | Error::CountMismatch { .. }
            | Error::Json { .. } => Category::Format,
            Error::Core { source, .. } => match source {
                C::InvalidConfig(_) => Category::Config,
                C::DimensionMismatch { .. } | C::LengthMismatch { .. } | C::BufferSize { .. } => {
                    Category::Ingest
                }
                _ => Category::Format,
            },
        }
    }
}
