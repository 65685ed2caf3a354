use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An enumeration or construction would exceed a configured size cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("numerical conditioning: {0}")]
    Conditioning(String),
    /// A post-hoc self check failed; indicates a bug rather than bad input.
    #[error("internal consistency: {0}")]
    Consistency(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        // Negated so that NaN fails the check.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
