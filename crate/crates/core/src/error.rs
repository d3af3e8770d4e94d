use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: String },

    #[error("missing field `{0}` for this policy")]
    MissingField(&'static str),

    #[error("field `{0}` does not apply to this policy")]
    ExtraneousField(&'static str),

    #[error("length mismatch: x has {x} slots, y has {y}")]
    LengthMismatch { x: usize, y: usize },

    #[error("n = {n} exceeds the enumeration limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("unstable: {0}")]
    Unstable(String),

    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid inter-arrival model: {0}")]
    InvalidModel(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn out_of_range(field: &'static str, value: impl ToString) -> Self {
        Error::OutOfRange {
            field,
            value: value.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
