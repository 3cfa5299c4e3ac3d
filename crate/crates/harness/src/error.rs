use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] nsgame_core::Error),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("isolation violation: player {player} asked for x_{index}")]
    Isolation { player: usize, index: usize },
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("referee reported: {0}")]
    Remote(String),
    /// The run was abandoned; `guesses[j]` holds what player `j` had answered.
    #[error("run aborted: {cause}")]
    Aborted {
        cause: Box<HarnessError>,
        guesses: Vec<Option<u8>>,
    },
}

impl HarnessError {
    /// The underlying error of an aborted run.
    pub fn root(&self) -> &HarnessError {
        match self {
            HarnessError::Aborted { cause, .. } => cause.root(),
            other => other,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
