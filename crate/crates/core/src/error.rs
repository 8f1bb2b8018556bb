use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
    /// Input data is malformed (non-finite values, empty arrays, shape mismatch).
    #[error("invalid input: {0}")]
    Input(&'static str),
    /// The grid cannot resolve the requested quantity.
    #[error("insufficient resolution: {0}")]
    Resolution(&'static str),
    /// A value falls outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// The integral-form constant degenerates at alpha = 2.
    #[error("degenerate constant: c_(d,alpha) vanishes at alpha = 2, use the spectral form")]
    DegenerateConstant,
    /// Too few samples for a statistical summary.
    #[error("too few samples: {count} found, {required} required")]
    Statistics { count: usize, required: usize },
    /// Stored data does not cover the requested time range.
    #[error("coverage error: {0}")]
    Coverage(&'static str),
}
