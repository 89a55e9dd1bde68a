use alloc::string::String;

/// Errors raised by the search core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("non-finite evaluation: {0}")]
    Evaluation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid benchmark recipe: {0}")]
    Recipe(String),
    #[error("benchmark error: {0}")]
    Benchmark(String),
    #[error("pretraining did not converge: {0}")]
    Pretraining(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;

pub(crate) fn ensure_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        bail!(Shape, "{what}: expected length {expected}, got {got}");
    }
    Ok(())
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        bail!(Numeric, "{what}: non-finite value {} at index {i}", values[i]);
    }
    Ok(())
}
