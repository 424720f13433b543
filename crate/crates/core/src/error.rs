use core::fmt;

/// Errors produced by the core algorithms and codecs.
#[derive(Debug, Clone, PartialEq, Eq)]
#[non_exhaustive]
pub enum Error {
    /// A box with `x2 <= x1` or `y2 <= y1`.
    NegativeArea { x1: i64, y1: i64, x2: i64, y2: i64 },
    /// Clipping a box to the frame left no area.
    DegenerateBox,
    EmptyCluster,
    EmptyInput,
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    LengthMismatch { expected: usize, found: usize },
    BufferSize { expected: usize, found: usize },
    InvalidConfig(&'static str),
    ShapeMismatch { expected: usize, found: usize },
    /// Zero-dimensional tensors are not supported by the containers.
    ScalarShape,
    BadMagic,
    UnsupportedVersion(u8, u8),
    UnsupportedDescr,
    HeaderParse(&'static str),
    PayloadTruncated { expected: usize, found: usize },
    CorruptIndex(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NegativeArea { x1, y1, x2, y2 } => {
                write!(f, "box ({x1},{y1},{x2},{y2}) has non-positive area")
            }
            Error::DegenerateBox => f.write_str("box has zero area after clipping to the frame"),
            Error::EmptyCluster => f.write_str("cluster has no member boxes"),
            Error::EmptyInput => f.write_str("empty input"),
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::BufferSize { expected, found } => {
                write!(f, "pixel buffer holds {found} bytes, expected {expected}")
            }
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::ShapeMismatch { expected, found } => write!(
                f,
                "shape describes {expected} elements but payload has {found}"
            ),
            Error::ScalarShape => f.write_str("scalar (zero-dimensional) tensors are not supported"),
            Error::BadMagic => f.write_str("bad magic bytes"),
            Error::UnsupportedVersion(major, minor) => {
                write!(f, "unsupported format version {major}.{minor}")
            }
            Error::UnsupportedDescr => f.write_str("unsupported dtype or memory order"),
            Error::HeaderParse(what) => write!(f, "header parse error: {what}"),
            Error::PayloadTruncated { expected, found } => write!(
                f,
                "payload truncated: expected {expected} bytes, found {found}"
            ),
            Error::CorruptIndex(what) => write!(f, "corrupt chunk index: {what}"),
        }
    }
}

impl core::error::Error for Error {}
