//! Error type shared across the library.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A corner diagonal in the partition/backtracking inversion fell below
    /// the singularity threshold. `level` counts partition steps from the
    /// outermost split; `bin` is the delay-Doppler bin index.
    #[error("singular corner diagonal at recursion level {level}, bin {bin} (|entry| = {magnitude:.3e})")]
    SingularCorner {
        level: usize,
        bin: usize,
        magnitude: f64,
    },

    /// Dense elimination found no usable pivot in the given column.
    #[error("numerically singular dense matrix at pivot column {0}")]
    SingularDense(usize),

    /// A per-symbol covariance entry degenerated to zero, so the SINR is
    /// undefined.
    #[error("degenerate covariance entry at symbol index {0}")]
    DegenerateCovariance(usize),

    /// Invalid configuration or parameters.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An instrumented tally disagreed with its closed-form prediction.
    #[error("operation-count mismatch: {0}")]
    CountMismatch(String),
}

/// Library result alias.
pub type Result<T> = std::result::Result<T, Error>;
