use thiserror::Error;

/// Every failure the pipeline can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid image dimensions: {0}")]
    Dimension(String),
    #[error("degenerate histogram: all pixels share intensity {0}")]
    DegenerateHistogram(u8),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no hand found in image")]
    NoHand,
    #[error("malformed silhouette: {0}")]
    MalformedSilhouette(String),
    #[error("ambiguous orientation: no 90-degree rotation puts the fingers up")]
    AmbiguousOrientation,
    #[error("ambiguous hand type: leftmost and rightmost extremes lie on row {0}")]
    AmbiguousHandType(i32),
    #[error("fingers touching: found {0} fingertip maxima, expected 5")]
    FingersTouching(usize),
    #[error("malformed contour: {0}")]
    MalformedContour(String),
    #[error("degenerate finger: {0}")]
    DegenerateFinger(String),
    #[error("finger occlusion: {0}")]
    FingerOcclusion(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    FeatureDimension { expected: usize, got: usize },
    #[error("template database is empty")]
    EmptyDatabase,
    #[error("unknown identity: {0}")]
    UnknownIdentity(String),
    #[error("duplicate identity: {0}")]
    DuplicateIdentity(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("invalid hand spec: {0}")]
    InvalidSpec(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
