use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("conditioning cell has zero prior mass")]
    ZeroMassCell,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("observed message is inconsistent with every remaining state")]
    InconsistentObservation,

    #[error("communication graph is not strongly connected")]
    NotStronglyConnected,

    #[error("malformed posterior: {0}")]
    MalformedPosterior(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("zero posterior value on chain state s{0}")]
    ZeroPosteriorOnChain(usize),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("all subtree weights vanished for the observed history")]
    DegenerateSubtree,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("missing results: {0}")]
    MissingResults(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
