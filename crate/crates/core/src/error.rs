use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("vertex {vertex} out of range (n = {n})")]
    InvalidVertex { vertex: usize, n: usize },

    #[error("element {0} has no candidate sets")]
    InfeasibleElement(usize),

    #[error("client {0} has no finite-cost facility")]
    InfeasibleClient(usize),

    #[error("terminals {s} and {t} are disconnected")]
    InfeasiblePair { s: usize, t: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large for exact oracle: {what} = {got} exceeds cap {cap}")]
    SizeCap {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
