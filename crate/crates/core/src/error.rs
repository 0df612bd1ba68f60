use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A dimension decided from a singular-value spectrum was not separated by
    /// the required gap.
    #[error("ambiguous rank in {context}: gap ratio {gap:.3e} below {required:.1e}")]
    AmbiguousRank { context: String, gap: f64, required: f64 },
    #[error("unexpected dimension for {what}: got {got}, expected {expected}")]
    Dimension { what: String, got: usize, expected: usize },
    #[error("shooting did not converge: {0}")]
    NotConverged(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
