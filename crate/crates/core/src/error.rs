use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid plant, trigger or configuration data.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Matrix exponential or propagated state is no longer finite.
    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("closed loop diverged at step {step} (log-norm {log_norm:.1})")]
    Diverged { step: usize, log_norm: f64 },

    /// A game state without outgoing edges.
    #[error("malformed game: {0}")]
    MalformedGame(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the input (including unreadable files)
    /// rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::UnknownName { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
