use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core crate.
///
/// Variants follow the failure classes the operations distinguish: bad
/// configuration, bad input data, undefined metrics, numerical blow-ups and
/// too little data to fit or analyse.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates an invariant. `field` names it.
    Config { field: String, reason: String },
    /// Input data does not conform to the model or schema.
    Input(String),
    /// A metric or quantity is undefined for the given input.
    Domain(String),
    /// NaN or infinity appeared in a loss, gradient or parameter.
    Numerical(String),
    /// Not enough points or records for the requested fit or analysis.
    InsufficientData(String),
    /// Knee detection on a curve that never decreases.
    NoKnee,
    /// Two distinct run specifications hashed to the same id.
    RunIdCollision(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config { field, reason } => write!(f, "invalid `{field}`: {reason}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::NoKnee => f.write_str("no knee: curve is monotone non-decreasing"),
            Error::RunIdCollision(id) => write!(f, "run id collision on {id}"),
        }
    }
}

impl core::error::Error for Error {}
