use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no scores to normalize")]
    NoScores,

    #[error("frame index mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: usize, found: usize },

    /// An empty frame makes every track through it impossible.
    #[error("frame {frame} has no detections")]
    EmptyFrame { frame: usize },

    #[error("no frames given")]
    NoFrames,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no event models given")]
    NoModels,

    #[error("permutation space too large: {tracks} tracks exceeds cap {cap}")]
    PermutationSpaceTooLarge { tracks: usize, cap: usize },

    #[error("no shared frames to compare")]
    NoSharedFrames,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Stable kebab-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBox(_) => "invalid-box",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NoScores => "no-scores",
            Error::FrameMismatch { .. } => "frame-mismatch",
            Error::EmptyFrame { .. } => "empty-frame",
            Error::NoFrames => "no-frames",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::InvalidModel(_) => "invalid-model",
            Error::NoModels => "no-models",
            Error::PermutationSpaceTooLarge { .. } => "permutation-space-too-large",
            Error::NoSharedFrames => "no-shared-frames",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    /// True for errors that describe an instance with no feasible solution
    /// rather than malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::EmptyFrame { .. } | Error::NoSharedFrames | Error::NoFrames)
    }
}
