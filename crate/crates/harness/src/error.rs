use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("sampler failed on seed {seed}: {source}")]
    Sampler {
        seed: u64,
        #[source]
        source: zodps_core::Error,
    },
}

impl HarnessError {
    /// Process exit status: 1 for bad input, 2 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Parse { .. } => 1,
            HarnessError::Io { .. } | HarnessError::Sampler { .. } => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Core argument errors raised while building configurations are
/// validation failures.
impl From<zodps_core::Error> for HarnessError {
    fn from(e: zodps_core::Error) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
