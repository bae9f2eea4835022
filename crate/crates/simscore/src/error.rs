use thiserror::Error;

/// Errors shared across the feature, quantization, distance and retrieval modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient beats")]
    InsufficientBeats,

    #[error("invalid chroma: {0}")]
    InvalidChroma(&'static str),

    #[error("empty sequence")]
    EmptySequence,

    #[error("too few points")]
    TooFewPoints,

    #[error("alphabet mismatch")]
    AlphabetMismatch,

    #[error("dimension mismatch")]
    DimensionMismatch,

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("insufficient length for embedding")]
    InsufficientLength,

    #[error("exclusion radius exhausts candidates")]
    ExclusionExhausted,

    #[error("degenerate denominator")]
    DegenerateDenominator,

    #[error("unknown id: {0}")]
    UnknownId(String),

    #[error("measure unavailable: {0}")]
    MeasureUnavailable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
