use std::path::PathBuf;

use thiserror::Error;

use crate::selection::Category;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: agents are collocated (current distance is zero)")]
    CollocatedAgents,

    #[error("degenerate geometry at t={timestep} for {category}: agents are collocated")]
    CollocatedAt { timestep: i64, category: Category },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: column `{column}` is not a number: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: duplicate (frame={frame}, id={id})")]
    DuplicateRow { row: usize, frame: i64, id: u64 },

    #[error("invalid lane {lane_id}: {reason}")]
    InvalidLane { lane_id: i64, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's data or arguments rather than
    /// a broken internal invariant.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}
