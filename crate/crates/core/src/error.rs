use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes or sizes of inputs do not agree.
    #[error("structural error: {0}")]
    Structure(String),

    /// Average precision is undefined for a species without positives.
    #[error("unevaluable: no positive labels")]
    Unevaluable,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content; `location` names the file and, where known,
    /// the row or field.
    #[error("{location}: {message}")]
    Format { location: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }
}
