use thiserror::Error;

/// Errors raised by the calculus.
///
/// The variants split into two families: mathematical domain failures
/// (everything up to `Stability`) and input/output failures. The CLI maps
/// the first family to exit code 1 and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular: {0}")]
    Singular(String),
    #[error("point lies in the S-spectrum: {0}")]
    SSpectrum(String),
    #[error("components do not commute: {0}")]
    Commutator(String),
    #[error("contour does not properly enclose the spectrum: {0}")]
    Enclosure(String),
    #[error("operator is not sectorial: {0}")]
    Sector(String),
    #[error("explicit scheme unstable: {0}")]
    Stability(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by the mathematics rather than by input handling.
    pub fn is_domain(&self) -> bool {
        !matches!(self, Error::Parse(_) | Error::Io { .. })
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
