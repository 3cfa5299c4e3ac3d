use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An object was used outside the party set or alphabet it was built for.
    #[error("domain error: {0}")]
    Domain(String),

    /// A probability distribution or weight vector failed its invariants.
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested enumeration exceeds a fixed size guard.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("config error: {0}")]
    Config(String),

    /// An operation was called on an object that does not meet its precondition.
    #[error("contract error: {0}")]
    Contract(String),

    #[error(
        "functional no-signalling violated: output of party {party} differs on inputs {x:?} and {y:?}"
    )]
    NotFunctionallyNoSignalling {
        party: usize,
        x: Vec<usize>,
        y: Vec<usize>,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}
