use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A file does not follow the expected binary or image layout.
    #[error("malformed {kind} data: {detail}")]
    Format { kind: &'static str, detail: String },

    /// Cohen's kappa is undefined when chance agreement equals one.
    #[error("kappa is undefined: chance agreement equals 1")]
    KappaUndefined,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(kind: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            kind,
            detail: detail.into(),
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Parameter(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
