//! Gaussian-state linear algebra in shot-noise units.
//!
//! Covariance matrices use the interleaved quadrature ordering
//! `(x1, p1, x2, p2, ...)` and every mode carries a unique label; blocks are
//! always addressed by label, never by raw row index.

mod covariance;
mod entropy;
mod ops;
mod spectrum;

pub use covariance::CovarianceMatrix;
pub use entropy::{entropy_of_spectrum, g_function, von_neumann_entropy};
pub use ops::{
    attenuate, beamsplitter, check_physicality, condition_on_heterodyne, single_mode_rotation,
    Physicality,
};
pub use spectrum::{symplectic_eigenvalues, symplectic_form, SymplecticSpectrum};
