use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed instance name {name:?}: {reason}")]
    InstanceName { name: String, reason: String },
    #[error("augmentation: {0}")]
    Augmentation(String),
    #[error("feature extraction: {0}")]
    Features(String),
    #[error("feature width mismatch: expected {expected}, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training requires at least two classes, found {0}")]
    SingleClass(usize),
    #[error("feature importance is not available for {0} models")]
    ImportanceUnsupported(&'static str),
    #[error("model has no splits; feature importance is undefined")]
    NoSplits,
    #[error("class {class:?} has {available} rows, {required} required")]
    InsufficientRows {
        class: String,
        available: usize,
        required: usize,
    },
    #[error("evaluation: {0}")]
    Evaluation(String),
    #[error("projection: {0}")]
    Projection(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
