use std::path::{Path, PathBuf};

use gridscope_core::embedding::EmbeddingError;
use gridscope_core::ingest::IngestError;
use gridscope_core::metrics::MetricsError;
use gridscope_core::topic_grids::TopicGridError;
use gridscope_core::{CloudError, SdError};
use thiserror::Error;

/// Errors surfaced by the CLI and the service, prefixed with the module that
/// raised them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("core_sd: {0}")]
    Cloud(#[from] CloudError),
    #[error("core_sd: {0}")]
    Sd(#[from] SdError),
    #[error("embedding: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("topic_grids: {0}")]
    TopicGrids(#[from] TopicGridError),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("interface: {0}")]
    Input(String),
    #[error("interface: not found: {0}")]
    NotFound(String),
    #[error("interface: cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("interface: invalid JSON in {}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("interface: cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("interface: internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 1 for bad input, 2 for failures not caused by the input.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Write { .. } | Error::Internal(_) => 2,
            _ => 1,
        }
    }

    pub fn read(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Read { path: path.to_path_buf(), source }
    }

    pub fn write(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Write { path: path.to_path_buf(), source }
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(Error::read(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
