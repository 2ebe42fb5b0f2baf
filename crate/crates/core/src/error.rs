use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("invalid static reduction: {0}")]
    InvalidReduction(String),

    #[error("outage of {branches:?} islands the grid")]
    Islanding { branches: Vec<String> },

    #[error("split of substation {substation} islands the grid (denominator {denominator:e})")]
    SingularSplit { substation: String, denominator: f64 },

    #[error("split of substation {substation} leaves no branch on busbar A")]
    DegenerateSplit { substation: String },

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("disconnected topology: {0}")]
    DisconnectedTopology(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
