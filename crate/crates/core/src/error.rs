use thiserror::Error;

/// Errors raised by the library. The CLI maps them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid memory spec: {0}")]
    InvalidSpec(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index {index} out of range (table length {len})")]
    IndexOutOfRange { index: u64, len: usize },
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("sampler capacity {0} exceeded")]
    CapacityExceeded(usize),
    #[error("weight must be positive and finite, got {0}")]
    NonPositiveWeight(f64),
    #[error("sampler is empty")]
    Empty,
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("enumeration needs more than {0} states")]
    TreeTooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the caller's parameters rather than by limits or I/O.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidInput(_)
                | Error::IndexOutOfRange { .. }
                | Error::NonPositiveWeight(_)
                | Error::WrongRegime(_)
                | Error::Unsupported(_)
                | Error::Degenerate(_)
                | Error::Json(_)
        )
    }

    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::ResourceLimit(_) | Error::CapacityExceeded(_) | Error::TreeTooLarge(_) | Error::Overflow(_)
        )
    }
}
