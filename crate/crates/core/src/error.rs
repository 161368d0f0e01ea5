use thiserror::Error;

/// Errors raised by the influence-matrix engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents that should agree do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Norm divergence, non-finite amplitudes or a failed decomposition.
    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    /// The requested computation exceeds a hard memory or size bound.
    #[error("resource bound exceeded: {0}")]
    Resource(String),

    /// Malformed checkpoint or container bytes.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
