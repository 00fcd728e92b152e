use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("circuit error: {0}")]
    Circuit(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("preprocessing error: {0}")]
    Preprocess(String),

    #[error("extraction error: {0}")]
    Extraction(String),

    #[error("attack error: {0}")]
    Attack(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: empty dataset")]
    EmptyDataset { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 1 usage/validation,
    /// 2 IO/parse, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Usage(_)
            | Error::Encoding(_)
            | Error::Attack(_)
            | Error::Extraction(_)
            | Error::Preprocess(_) => 1,
            Error::Parse { .. } | Error::EmptyDataset { .. } | Error::Io { .. } | Error::Json(_) => 2,
            Error::Circuit(_)
            | Error::Infeasible(_)
            | Error::Training(_)
            | Error::Inference(_)
            | Error::Oracle(_)
            | Error::Evaluation(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
