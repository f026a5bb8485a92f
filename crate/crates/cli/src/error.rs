use std::io;
use std::path::PathBuf;

use thiserror::Error;
use wenk::oracle::OracleError;
use wenk::samplers::SamplerError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("seed {seed}: {source}")]
    Sampler {
        seed: u64,
        #[source]
        source: SamplerError,
    },
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sampler { source, .. } if source.is_config() => 2,
            CliError::Sampler { .. } => 3,
            CliError::Oracle(OracleError::BadGrid(_)) => 2,
            CliError::Oracle(OracleError::NotLinear) => 2,
            CliError::Oracle(_) => 3,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}
