use std::fmt::Display;
use std::path::Path;

/// Errors surfaced by the IO layer and the command line, grouped by the exit
/// code they map to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Numeric(_) => 4,
        }
    }

    /// `error[<kind>]: <message>` on a single line.
    pub fn one_line(&self) -> String {
        let text = self.to_string();
        let msg: Vec<&str> = text.split_whitespace().collect();
        format!("error[{}]: {}", self.kind(), msg.join(" "))
    }

    /// Prefixes the message with some context, keeping the kind.
    pub fn context(self, what: impl Display) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            Error::Data(m) => Error::Data(format!("{what}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{what}: {m}")),
        }
    }
}

impl From<cilo_core::Error> for Error {
    fn from(e: cilo_core::Error) -> Self {
        match e {
            cilo_core::Error::Numeric { .. } => Error::Numeric(e.to_string()),
            other => Error::Data(other.to_string()),
        }
    }
}

pub(crate) fn io_error(path: &Path, e: impl Display) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
