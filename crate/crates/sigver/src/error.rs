//! Error type shared across the library.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A vector with zero norm, for which cosine similarity is undefined.
    #[error("degenerate vector: zero norm, cosine similarity is undefined")]
    DegenerateVector,

    /// A feature vector with no components.
    #[error("empty feature vector")]
    EmptyVector,

    /// A feature value that is NaN or infinite.
    #[error("non-finite feature value")]
    NonFiniteFeature,

    /// An error attributable to one entry of a pairwise similarity matrix.
    #[error("similarity matrix entry ({row}, {col}): {source}")]
    MatrixEntry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    /// A similarity matrix with no entries.
    #[error("empty similarity matrix")]
    EmptyMatrix,

    /// A writer does not have enough samples for the requested split.
    #[error("writer {writer_id}: insufficient samples, need {required}, have {available}")]
    InsufficientSamples {
        writer_id: String,
        required: usize,
        available: usize,
    },

    /// A writer id that does not occur in the dataset.
    #[error("writer {0} not present in dataset")]
    WriterNotFound(String),

    /// Decision and label sequences of different lengths.
    #[error("length mismatch: {decisions} decisions vs {labels} labels")]
    LengthMismatch { decisions: usize, labels: usize },

    /// A rate whose denominator class has no probes.
    #[error("{class} rate undefined: no {class} probes were evaluated")]
    UndefinedRate { class: &'static str },

    /// A class with no samples where at least one is required.
    #[error("class {label} has no samples")]
    EmptyClass { label: &'static str },

    /// A malformed line or record in a data file.
    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    /// An error attributable to one sample of a data file.
    #[error("{}:{line}: sample {sample_id}: {source}", file.display())]
    Sample {
        file: PathBuf,
        line: usize,
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    /// A file whose contents disagree with the counts declared for it.
    #[error("{}: writer {writer_id}: declared {declared} {what}, found {found}", file.display())]
    CountMismatch {
        file: PathBuf,
        writer_id: String,
        what: &'static str,
        declared: usize,
        found: usize,
    },

    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
