use alloc::string::String;

/// Failure modes shared by every stage of the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent caller input.
    #[error("invalid input: {0}")]
    Input(String),
    /// Two objects that must share a shape do not.
    #[error("shape mismatch: expected {expected}, got {found}")]
    Shape { expected: usize, found: usize },
    /// A size computation exceeded the platform index range.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A non-finite value appeared during a numeric computation.
    #[error("numeric failure in {context}: non-finite value{}", .layer.map(|l| alloc::format!(" at layer {l}")).unwrap_or_default())]
    Numeric {
        context: &'static str,
        layer: Option<usize>,
    },
    /// A reference quantity used as a normaliser is zero.
    #[error("degenerate reference: {0}")]
    Degenerate(String),
    /// The environment was stepped past its horizon.
    #[error("episode already terminated at step {0}")]
    Terminal(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
