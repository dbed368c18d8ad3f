use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("fit did not converge: {msg} (best residual {residual:.3e})")]
    Fit { msg: String, residual: f64 },

    #[error("estimation failed: {msg} (best residual {residual:.3e})")]
    Estimation { msg: String, residual: f64 },

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{0}: input is empty")]
    EmptyInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config { .. } => "config",
            Error::Fit { .. } => "fit",
            Error::Estimation { .. } => "estimation",
            Error::UndefinedEstimate(_) => "undefined_estimate",
            Error::Parse { .. } => "parse",
            Error::EmptyInput(_) => "empty_input",
            Error::Io { .. } => "io",
        }
    }
}

/// Fails with [`Error::EmptyInput`] if `text` holds nothing but blank and `#` lines.
pub(crate) fn require_content(text: &str, origin: &str) -> Result<()> {
    if text.lines().map(str::trim).all(|l| l.is_empty() || l.starts_with('#')) {
        return Err(Error::EmptyInput(origin.to_string()));
    }
    Ok(())
}
