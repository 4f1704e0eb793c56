use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::Side;

pub type Result<T> = std::result::Result<T, KreinError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KreinError {
    /// The spectral parameter lies on (or within the tolerance band of) `[0, ∞)`.
    #[error("spectral parameter {lambda} lies on the essential spectrum [0, inf)")]
    EssentialSpectrum { lambda: Complex64 },

    /// The spectral parameter is a Dirichlet eigenvalue of the interior mode operator.
    #[error("spectral parameter {lambda} is a Dirichlet eigenvalue of interior mode {mode}")]
    DegenerateInterior { mode: i32, lambda: Complex64 },

    /// The spectral parameter is a Dirichlet eigenvalue of the exterior mode operator.
    #[error("spectral parameter {lambda} is a Dirichlet eigenvalue of exterior mode {mode}")]
    DegenerateExterior { mode: i32, lambda: Complex64 },

    /// `M_m(λ) + τ_m(λ)` is numerically zero: λ is (close to) an eigenvalue of the coupled operator.
    #[error("M + tau is near singular for mode {mode} at {lambda} (|M + tau| = {magnitude:e})")]
    NearSingular {
        mode: i32,
        lambda: Complex64,
        magnitude: f64,
    },

    #[error("bessel function argument {z} outside the supported domain: {reason}")]
    BesselDomain { z: Complex64, reason: &'static str },

    #[error("bessel order {order} exceeds the supported maximum {max}")]
    BesselOrder { order: u32, max: u32 },

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("mismatched operands: {0}")]
    Mismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("unsupported {side:?} source tail: {reason}")]
    UnsupportedTail { side: Side, reason: String },
}

impl KreinError {
    /// True for failures caused by the spectral parameter rather than the inputs.
    pub fn is_spectral(&self) -> bool {
        matches!(
            self,
            KreinError::EssentialSpectrum { .. }
                | KreinError::DegenerateInterior { .. }
                | KreinError::DegenerateExterior { .. }
                | KreinError::NearSingular { .. }
        )
    }
}
