use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u16, found: u16 },

    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),

    #[error("{0} unexpected trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("record {record_id}: label index {label} out of range (vocabulary has {label_count})")]
    LabelOutOfRange {
        record_id: u64,
        label: u32,
        label_count: usize,
    },

    #[error("invalid utf-8 in {0}")]
    InvalidUtf8(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate input: vector has zero norm")]
    DegenerateInput,

    #[error("class {0:?} has no examples")]
    EmptyClass(String),

    #[error("class {0:?} is degenerate: its mean embedding has zero norm")]
    DegenerateClass(String),

    #[error("class {0:?} already exists")]
    DuplicateClass(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("softmax head requires exactly one target label per row (row {row} has {count})")]
    NotSingleLabel { row: usize, count: usize },

    #[error("dataset has {available} labels but {needed} are required")]
    InsufficientLabels { needed: usize, available: usize },

    #[error("label {label:?} has {available} available groups but {needed} are required")]
    InsufficientExamples {
        label: String,
        needed: usize,
        available: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("episode {index}: {source}")]
    Episode { index: usize, source: Box<Error> },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by a bad configuration rather than bad data.
    /// Wraps an i/o error with the path it concerns.
    pub fn file(path: impl AsRef<std::path::Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::File { path, source }
    }

    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_) => true,
            Error::Episode { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
