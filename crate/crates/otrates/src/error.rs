use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("measure construction: {0}")]
    Measure(String),

    #[error("cost model: {0}")]
    Cost(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value at iteration {iter}: {msg}")]
    Solver { iter: usize, msg: String },

    #[error(
        "reference solve did not reach tolerance {tol:e} within {cap} iterations; \
         use a larger epsilon or raise the iteration cap"
    )]
    ReferenceTolerance { tol: f64, cap: usize },

    #[error("supports are not equivalent: {0}")]
    SupportMismatch(String),

    #[error("scenario `{name}`: {source}")]
    Scenario {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
