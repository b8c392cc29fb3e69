use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lfsgd_core::Error),
    #[error("diverged after {grad_evals} gradient evaluations (train loss {loss})")]
    Diverged { grad_evals: u64, loss: f64 },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("metrics file: {0}")]
    Csv(#[from] csv::Error),
    #[error("metrics file: {0}")]
    Schema(String),
    #[error("worker thread panicked")]
    WorkerPanic,
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
