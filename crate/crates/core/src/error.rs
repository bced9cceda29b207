/// Error type shared by every module in the crate.
///
/// The I/O-format variants ([`Error::BadMagic`], [`Error::TruncatedPayload`],
/// [`Error::DimensionOverflow`], [`Error::Parse`]) are kept distinct so
/// callers can report the exact failure class.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pixel ({x}, {y}) is not covered by any triangle")]
    NotCovered { x: usize, y: usize },

    #[error("mesh correspondence mismatch: {0}")]
    CorrespondenceMismatch(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },

    #[error("truncated payload: {0}")]
    TruncatedPayload(String),

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
