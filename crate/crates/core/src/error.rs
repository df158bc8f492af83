use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Beta moment inversion produced a non-positive shape parameter.
    #[error("infeasible moments (mean={mean}, std={std}): alpha={alpha}, beta={beta}")]
    InfeasibleMoments {
        mean: f64,
        std: f64,
        alpha: f64,
        beta: f64,
    },

    #[error("{file}:{line}: {message}")]
    Schema {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Broad failure class, used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Dataset,
    Runtime,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } => ErrorClass::Config,
            Error::Schema { .. } | Error::Topology(_) => ErrorClass::Dataset,
            Error::Stage { stage, source } => match (*stage, source.class()) {
                ("load dataset", ErrorClass::Runtime) => ErrorClass::Dataset,
                (_, class) => class,
            },
            _ => ErrorClass::Runtime,
        }
    }
}
