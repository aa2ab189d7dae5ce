use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or precondition; the string names the offending field.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dense budget exceeded: kernel needs {requested} complex entries, cap is {cap}")]
    Budget { requested: u128, cap: usize },

    #[error("rank cap exceeded: result would have rank {rank}, cap is {cap}")]
    RankCap { rank: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("field blow-up at step {step} (t = {time}): max amplitude {amplitude:e}")]
    BlowUp { step: usize, time: f64, amplitude: f64 },

    #[error("closure mismatch: {0}")]
    Closure(String),

    #[error("depth {depth} at level {level} needs level {needed}, beyond the closure-extended truncation {available}")]
    Depth {
        level: usize,
        depth: usize,
        needed: usize,
        available: usize,
    },

    #[error("malformed snapshot at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
