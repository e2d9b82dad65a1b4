use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: short data: expected {expected} bytes, found {found}")]
    ShortData {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: unsupported on-disk datatype code {code}")]
    UnsupportedDatatype { path: PathBuf, code: i16 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("volume spacing {0:?} is not isotropic")]
    NonIsotropic([f64; 3]),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-identifiable: {0}")]
    NonIdentifiable(String),

    #[error("optimizer failed to converge after {0} iterations")]
    NotConverged(usize),

    #[error("rating {rating} out of range for a {classes}-class scale")]
    RatingOutOfRange { rating: usize, classes: usize },

    #[error("empty region of interest")]
    EmptyRoi,

    #[error("no imaging modality available")]
    NoModality,

    #[error("tube placement failed after {0} attempts")]
    PlacementFailed(usize),

    #[error("empty parameter grid")]
    EmptyGrid,

    #[error("unknown axis name `{0}`")]
    UnknownAxis(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),

    #[error("zero rank variance")]
    ZeroRankVariance,

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("case `{id}`: {source}")]
    Case {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_case(self, id: &str) -> Self {
        Error::Case {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
