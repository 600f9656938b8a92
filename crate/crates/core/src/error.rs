use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("continued fraction has {available} digits, {requested} requested")]
    DepthExhausted { requested: usize, available: usize },

    #[error("sign could not be resolved within {max_depth} continued-fraction digits")]
    SignUnresolved { max_depth: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("horizon {requested} exceeds trace horizon {available}")]
    HorizonExceeded { requested: usize, available: usize },

    #[error("cocycle has nonzero mean")]
    NonzeroMean,

    #[error("matrix is not primitive")]
    NotPrimitive,

    #[error("Rauzy induction hit a tie between competing intervals")]
    RauzyTie,

    #[error("precision cap of {bits} bits reached before certification")]
    PrecisionExhausted { bits: u32 },

    #[error("word length {length} exceeds materialization cap {cap}")]
    LengthCap { length: String, cap: usize },

    #[error("arithmetic overflow: {0}")]
    Overflow(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
