use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image too small: {width}x{height} (minimum {min}x{min})")]
    ImageTooSmall { width: u32, height: u32, min: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed payload: {0}")]
    MalformedPayload(String),

    #[error("statistics contain no samples")]
    EmptyStats,

    #[error("conditional entropy requested for identical positions ({0})")]
    SamePosition(usize),

    #[error("invalid permutation of length {0}")]
    InvalidPermutation(usize),

    #[error("insufficient training data: {found} vectors (need at least {needed})")]
    InsufficientData { found: usize, needed: usize },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("checksum mismatch: stored {stored:#010x}, decoded {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("empty input")]
    EmptyInput,

    #[error("keypoint at ({x}, {y}) quarter-pel lies outside a {width}x{height} image")]
    OutOfBoundsKeypoint { x: u32, y: u32, width: u32, height: u32 },

    #[error("malformed location layer: {0}")]
    MalformedLayer(String),

    #[error("stream contains no layers")]
    NoLayers,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated input: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },

    #[error("duplicate layer {0:?}")]
    DuplicateLayer([u8; 4]),

    #[error("unknown layer tag {0:?}")]
    UnknownLayer([u8; 4]),

    #[error("required layer missing: {0}")]
    LayerMissing(&'static str),

    #[error("query feature set is empty")]
    EmptyQuery,

    #[error("query has no relevant documents")]
    NoRelevantDocuments,

    #[error("invalid quality factor {0} (expected 1..=100)")]
    InvalidQuality(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image file {path}: {message}")]
    ImageFile { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
