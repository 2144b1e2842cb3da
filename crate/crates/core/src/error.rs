use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("density matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("all {0} measurement settings have been used")]
    SettingsExhausted(usize),

    #[error(transparent)]
    Bank(#[from] BankError),

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

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Validation failures when reading a pattern bank file.
#[derive(Debug, Error)]
pub enum BankError {
    #[error("bank schema error: {0}")]
    Schema(String),

    #[error("unsupported bank schema version {found} (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },

    #[error("bank dimension mismatch: {0}")]
    Dimension(String),

    #[error("count {count} at setting {setting}, probe {probe} exceeds N_p = {copies}")]
    CountOutOfRange {
        setting: usize,
        probe: usize,
        count: u64,
        copies: u64,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Dimension { .. }
            | Error::Bank(_)
            | Error::SettingsExhausted(_)
            | Error::NotHermitian(_)
            | Error::Json { .. } => 1,
            Error::Io { .. } | Error::Csv { .. } => 2,
            Error::NotPositiveDefinite(_) | Error::Numerical(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
