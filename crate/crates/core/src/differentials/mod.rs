//! Holomorphic κ-differentials on the Bolza surface: Poincaré-series basis,
//! Hodge-star pairing, Kodaira map and zero location.

pub mod basis;
pub mod kodaira;
pub mod poincare;
pub mod zeros;

pub use basis::{build_basis, differential_dimension, AlphaCoeffs, ClassCoeffs, DifferentialBasis};
pub use kodaira::{
    class_from_point, fubini_study, kodaira_distance, kodaira_point, orthogonality_residual, q2_basis,
    KodairaHit, KodairaSampler,
};
pub use poincare::poincare_series;
pub use zeros::{locate_zeros, Zero};
