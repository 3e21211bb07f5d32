use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input; `line` is 1-based.
    #[error("{context}, line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },
    /// Well-formed input that breaks a data invariant.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("word {0:?} is not in the embedding vocabulary")]
    OutOfVocabulary(String),
    /// Arguments that violate an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Runtime(String),
    /// Failure inside a named pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.to_string(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True for errors caused by bad input rather than by the environment.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Runtime(_) => false,
            Error::Stage { source, .. } => source.is_validation(),
            _ => true,
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

/// Attaches a stage name to errors.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
