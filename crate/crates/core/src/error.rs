use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, ranges, sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("checkpoint corrupted: {0}")]
    Corruption(String),

    #[error("checkpoint version mismatch: {0}")]
    Version(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dims(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::contract(format!(
            "{what}: dimension mismatch ({a} vs {b})"
        )));
    }
    Ok(())
}
