//! Scalar abstraction for the covariance-matrix machinery.
//!
//! Everything that only needs real arithmetic, square roots, logarithms and
//! dense linear algebra is written against [`Real`]. `f64` is the working
//! precision of the crate; `f32` is supported with looser tolerances.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the Gaussian-state code.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Relative tolerance for the symmetry check on covariance matrices.
    const SYMMETRY_TOL: f64;
    /// Symplectic eigenvalues in `[1 - PHYSICAL_TOL, 1)` are clamped to 1.
    const PHYSICAL_TOL: f64;
    /// Absolute tolerance used for identities that should hold exactly.
    const IDENTITY_TOL: f64;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f64 {
    const SYMMETRY_TOL: f64 = 1e-12;
    const PHYSICAL_TOL: f64 = 1e-9;
    const IDENTITY_TOL: f64 = 1e-10;
}

impl Real for f32 {
    const SYMMETRY_TOL: f64 = 1e-5;
    const PHYSICAL_TOL: f64 = 1e-4;
    const IDENTITY_TOL: f64 = 1e-4;
}
