use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no supported frames found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("insufficient history: frame {t} needs {window} preceding frames")]
    InsufficientHistory { t: usize, window: usize },
    #[error("pixel ({x}, {y}) outside {width}x{height} frame")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("no labeled frame has enough history")]
    NoEligibleFrames,
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error("insufficient frames: {frames} frames for {segments} segments")]
    InsufficientFrames { frames: usize, segments: usize },
    #[error("segment range {start}..={end} is too short (need at least 2 frames)")]
    RangeTooShort { start: usize, end: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("ragged rows: {0}")]
    RaggedRows(String),
    #[error("training set needs positive and negative bags ({positive} positive, {negative} negative)")]
    MissingPolarity { positive: usize, negative: usize },
    #[error("inconsistent trim map: {0}")]
    InconsistentMap(String),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("output root is locked by another run: {0}")]
    Locked(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::NonFiniteLoss { .. } => 4,
            Error::EmptySelection(_) => 5,
            _ => 3,
        }
    }
}
