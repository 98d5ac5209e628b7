use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The scenario file or a state is inconsistent with the scenario.
    #[error("scenario: {0}")]
    Scenario(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown region `{0}`")]
    UnknownRegion(String),

    #[error("invalid plan at action {index}: {reason}")]
    InvalidPlan { index: usize, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unsolvable instance for task `{task}`: {reason}")]
    Unsolvable { task: String, reason: String },

    #[error("candidate {index} failed: {source}")]
    Candidate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
