use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the planning, sizing, emission and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("duplicate subject id `{0}`")]
    DuplicateSubject(String),

    #[error("subject `{subject}`: non-contiguous slice indices")]
    NonContiguousSlices { subject: String },

    #[error("resource model is not calibrated")]
    UncalibratedModel,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid plan: {}", .0.join("; "))]
    InvalidPlan(Vec<String>),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("unrecognized backend `{0}` (expected sge, slurm or local)")]
    UnknownBackend(String),

    #[error("command for task `{task}` contains a newline")]
    MultilineCommand { task: String },

    #[error("task `{task}` requests {need} but the budget is {budget}")]
    BudgetTooSmall {
        task: String,
        need: String,
        budget: String,
    },

    #[error("job {job} can never fit on any node: {reason}")]
    UnplaceableJob { job: u64, reason: String },

    #[error("job {job} alone exceeds the per-user QoS cap: {reason}")]
    ExceedsQosCap { job: u64, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the filesystem rather than of the inputs' content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
