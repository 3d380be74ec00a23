use thiserror::Error;

/// Errors raised by the modelling, inference and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough (or degenerate) data to compute the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Input records violate a dataset invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Parameter vectors, entity sets or draw tables do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// The log-posterior was not finite at the starting point of a chain.
    #[error("initialization error: {0}")]
    Initialization(String),

    /// A chain rejected every proposal for a whole adaptation window.
    #[error("chain {chain} stuck: no proposal accepted in {window} warmup iterations at log density {log_density}")]
    StuckChain {
        chain: usize,
        window: usize,
        log_density: f64,
    },

    /// R-hat or ESS cannot be computed (e.g. constant chains).
    #[error("diagnostic undefined: {0}")]
    DiagnosticUndefined(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
