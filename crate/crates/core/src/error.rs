use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A field or control vector had the wrong length for the grid.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The forward integration exceeded the blow-up threshold.
    #[error("integration diverged at step {step} (t = {t}): max |field| = {magnitude:e}")]
    Diverged { step: usize, t: f64, magnitude: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no sign change found: {0}")]
    NoRoot(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
