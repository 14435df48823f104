use std::path::PathBuf;

/// Errors from file formats, configuration and orchestration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] scalegnn_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: checksum mismatch (manifest {expected}, file {found})")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: expected {expected} elements, found {found}")]
    CountMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{path}: schema version {found} is not supported (expected {expected})")]
    Version { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: not a {kind} array file")]
    BadMagic { path: PathBuf, kind: &'static str },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn json_err(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Error {
    let path = path.into();
    move |source| Error::Json { path, source }
}
