use thiserror::Error;

/// Errors raised by the hedging engine.
#[derive(Debug, Error)]
pub enum HedgeError {
    /// A caller supplied a value outside the documented domain.
    #[error("invalid input `{name}`: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    /// Internal shape or sequencing contract was broken.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The policy produced non-finite positions, activations or losses.
    #[error("diverged: {0}")]
    Diverged(String),

    /// The Merton series was cut off while too much Poisson mass remained.
    #[error("series cutoff {cutoff} leaves Poisson tail mass {tail:e}")]
    SeriesTruncation { cutoff: usize, tail: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HedgeError>;

impl HedgeError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        HedgeError::InvalidInput {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(HedgeError::invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(HedgeError::invalid(name, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(HedgeError::invalid(name, format!("must be >= 0, got {value}")))
    }
}
