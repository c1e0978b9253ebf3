use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum CubenetError {
    #[error("sector with {size} states exceeds the configured cap of {cap}")]
    SectorCap { size: u128, cap: usize },

    #[error("mode {mode} out of range for a basis with {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("sector mismatch: {0}")]
    SectorMismatch(String),

    #[error("operator is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("mode transform is not orthogonal (max deviation {max_deviation:.3e})")]
    NotOrthogonal { max_deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("Bethe roots {0} and {1} coincide")]
    CoincidentRoots(usize, usize),

    #[error("interaction strength U is zero; the root equations are undefined")]
    VanishingInteraction,

    #[error("dimension count mismatch: {0}")]
    CountMismatch(String),
}

pub type Result<T> = std::result::Result<T, CubenetError>;
