use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the ranking engine.
///
/// [`Error::is_format`] separates malformed input files from bad arguments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector norm is below 1e-12 and cannot be normalized")]
    ZeroVector,
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding dimension must be positive")]
    DimensionZero,
    #[error("{what} = {value} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("similarity row is empty")]
    EmptyRow,
    #[error("gallery is empty after filtering")]
    EmptyGallery,
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("histogram needs at least 2 bins, got {0}")]
    InvalidBins(usize),
    #[error("IoU threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("frame `{0}` is not present in the ground truth")]
    UnknownFrame(String),
    #[error("item `{0}` is not present in the dataset")]
    UnknownItem(String),
    #[error("probe `{0}` is not present in the dataset")]
    UnknownProbe(String),
    #[error("probe `{0}` has no person id")]
    UnlabeledProbe(String),
    #[error("no ground-truth occurrences")]
    NoGroundTruth,
    #[error("{hits} hits exceed {num_gt} ground-truth boxes")]
    TooManyHits { hits: usize, num_gt: usize },
    #[error("frame `{frame_id}` contains person `{person_id}` more than once")]
    DuplicatePerson { frame_id: String, person_id: String },
    #[error("probe context invalid: {0}")]
    InvalidContext(String),
    #[error("requested gallery size {requested} exceeds the {available} available items")]
    SizeTooLarge { requested: usize, available: usize },
    #[error("requested gallery size {requested} is smaller than the {positives} true positives")]
    SizeTooSmall { requested: usize, positives: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("embedding file holds {embeddings} rows but metadata has {records} records")]
    CountMismatch { embeddings: usize, records: usize },
    #[error("item `{item_id}` references unknown frame `{frame_id}`")]
    DanglingFrameRef { item_id: String, frame_id: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("item `{item_id}`: {source}")]
    Item {
        item_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn for_item(item_id: &str, source: Error) -> Self {
        Error::Item {
            item_id: item_id.to_owned(),
            source: Box::new(source),
        }
    }

    /// Input files that could not be decoded or cross-referenced.
    pub fn is_format(&self) -> bool {
        match self {
            Error::Format(_)
            | Error::CountMismatch { .. }
            | Error::DanglingFrameRef { .. }
            | Error::DimensionZero
            | Error::DuplicatePerson { .. }
            | Error::Io(_) => true,
            Error::Item { source, .. } => source.is_format(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
