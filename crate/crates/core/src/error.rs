use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid graph at {location}: {reason}")]
    InvalidGraph { location: String, reason: String },

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model is not stationary: companion spectral radius {radius:.12}")]
    NonStationary { radius: f64 },

    #[error("singular system: {reason} (condition estimate {condition:.3e})")]
    Singular { reason: String, condition: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonStationary { .. } | Error::Singular { .. } | Error::Numerical(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownNode(_) => "unknown_node",
            Error::InvalidGraph { .. } => "invalid_graph",
            Error::Parse { .. } => "parse",
            Error::InvalidInput(_) => "invalid_input",
            Error::Precondition(_) => "precondition",
            Error::NonStationary { .. } => "non_stationary",
            Error::Singular { .. } => "singular",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
