//! Error type shared across the library.

/// Errors produced by construction, evaluation, and the studies.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Layer shapes, parameter vectors, or row widths do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at iteration {iteration}")]
    Diverged { iteration: usize },

    /// Training finished without improving on its starting loss.
    #[error("training made no progress: initial loss {initial}, final loss {final_loss}")]
    NoProgress { initial: f64, final_loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
