use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes, one per error family.
pub mod exit_code {
    pub const FAILURE: i32 = 1;
    pub const IO: i32 = 3;
    pub const FORMAT: i32 = 4;
    pub const DIVERGED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: bad magic, not a {expected} file")]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{path}: format version {found}, this build reads {expected}")]
    VersionMismatch { path: PathBuf, found: String, expected: String },
    #[error("{path}: truncated at record {record}")]
    Truncated { path: PathBuf, record: usize },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(urpca_core::Error),
}

impl From<urpca_core::Error> for Error {
    fn from(e: urpca_core::Error) -> Self {
        match e {
            urpca_core::Error::Diverged(step) => Error::Diverged(format!("non-finite loss or gradient at step {step}")),
            e => Error::Core(e),
        }
    }
}

impl Error {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    pub fn format(path: impl AsRef<Path>, detail: impl Into<String>) -> Error {
        Error::Format { path: path.as_ref().to_path_buf(), detail: detail.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => exit_code::IO,
            Error::BadMagic { .. } | Error::VersionMismatch { .. } | Error::Truncated { .. } | Error::Format { .. } => {
                exit_code::FORMAT
            }
            Error::Diverged(_) => exit_code::DIVERGED,
            Error::Usage(_) | Error::Core(_) => exit_code::FAILURE,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
