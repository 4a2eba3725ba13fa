//! File formats, experiment configuration and the replication driver.

pub mod config;
pub mod experiment;
pub mod formats;

use std::path::PathBuf;

use spectrum_bandit_core as core_api;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] core_api::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

impl SimError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        SimError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| SimError::Io { path, source }
    }

    /// 3 for budget and convergence failures, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
