use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    /// An element of a map or scenario violates one of its invariants.
    #[error("validation error in {element} {id}: {reason}")]
    Validation {
        element: &'static str,
        id: i64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry in path {path}: {reason}")]
    Degenerate { path: String, reason: String },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    /// An output already exists and overwriting was not requested.
    #[error("refusing to overwrite {0} (use --force)")]
    Exists(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(element: &'static str, id: i64, reason: impl Into<String>) -> Self {
        Error::Validation {
            element,
            id,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Validation { .. } | Error::Config(_))
    }
}
