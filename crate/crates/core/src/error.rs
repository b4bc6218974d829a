use alloc::string::String;

/// Errors raised by the certification core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A real-valued input lies outside the function's domain (NaN, p ∉ [0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Two tensors (or a tensor and a classifier) disagree on shape.
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    /// Incompatible combination of transform, noise and region.
    #[error("configuration error: {0}")]
    Config(String),
    /// The base classifier failed to produce a label.
    #[error("classifier evaluation failed: {0}")]
    Evaluation(String),
    /// The requested analytic pairing has no closed form.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}

pub(crate) use bail;
