use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] gfmsim::error::Error),

    #[error("cannot read config {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("plot {name}: {reason}")]
    Plot { name: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use gfmsim::error::Error;
        match self {
            CliError::Sim(Error::Config { .. } | Error::SingularNetwork(_)) | CliError::ConfigFile { .. } => {
                EXIT_CONFIG
            }
            CliError::Sim(Error::NonFiniteState { .. } | Error::NoFeasibleImprovement) => EXIT_DIVERGED,
            CliError::Io { .. } | CliError::Plot { .. } => EXIT_FAILURE,
        }
    }
}
