use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A rank, item or window argument lies outside the list it refers to.
    #[error("input out of domain: {0}")]
    InputDomain(String),
    #[error("invalid position bias curve: {0}")]
    InvalidCurve(String),
    /// An IPS denominator is zero, so the estimator is undefined for the data.
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidCurve(_) => 2,
            Error::Data(_) | Error::InputDomain(_) => 3,
            Error::SupportViolation(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}
macro_rules! data_err {
    ($($arg:tt)*) => { $crate::error::Error::Data(format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use data_err;
