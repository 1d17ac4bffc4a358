use std::path::PathBuf;

/// Errors produced by the simulator and the analysis routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument outside the domain of a function, e.g. `t <= 0` for the intensity.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value outside an allowed range, e.g. an event beyond the last cycle.
    #[error("range error: {0}")]
    Range(String),

    #[error("insufficient data: need at least {needed}, got {got} ({what})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// A hot swap scheduled for a cycle that is not in the future.
    #[error("cannot schedule activation at cycle {activation} (current cycle {current})")]
    Schedule { activation: u64, current: u64 },

    /// A configuration value failed validation. `key` is the dotted key path.
    #[error("invalid config `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// A malformed input row. `row` is 1-based and counts the header line.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
