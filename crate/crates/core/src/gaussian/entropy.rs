use super::{symplectic_eigenvalues, CovarianceMatrix, SymplecticSpectrum};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bosonic entropy function `g(x) = (x+1) log2(x+1) - x log2 x`, with `g(0) = 0`.
pub fn g_function<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::Domain(format!("g(x) needs x >= 0, got {x}")));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    let xp1 = x + T::one();
    Ok(xp1 * xp1.log2() - x * x.log2())
}

/// `Σ g((ν - 1)/2)` with eigenvalues just below 1 clamped to 1.
pub fn entropy_of_spectrum<T: Real>(spectrum: &SymplecticSpectrum<T>) -> Result<T> {
    let tol = T::lit(T::PHYSICAL_TOL);
    let half = T::lit(0.5);
    let mut s = T::zero();
    for &nu in spectrum.values() {
        if nu < T::one() - tol {
            return Err(Error::Unphysical {
                min_eigenvalue: nu.as_f64(),
            });
        }
        s += g_function((nu.max(T::one()) - T::one()) * half)?;
    }
    Ok(s)
}

/// Von Neumann entropy in bits of a Gaussian state.
pub fn von_neumann_entropy<T: Real>(cm: &CovarianceMatrix<T>) -> Result<T> {
    entropy_of_spectrum(&symplectic_eigenvalues(cm)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_reference_values() {
        assert_eq!(g_function(0.0f64).unwrap(), 0.0);
        assert_eq!(g_function(1.0f64).unwrap(), 2.0);
        // 40-digit reference value
        assert!((g_function(0.5f64).unwrap() - 1.377_443_751_081_734_3).abs() < 1e-15);
        assert!((g_function(2.0f64).unwrap() - 2.754_887_502_163_468_5).abs() < 1e-14);
        assert!(g_function(-1e-3f64).is_err());
        assert!(g_function(f64::NAN).is_err());
    }

    #[test]
    fn entropies() {
        let vac = CovarianceMatrix::<f64>::vacuum(vec!["A"]).unwrap();
        assert_eq!(von_neumann_entropy(&vac).unwrap(), 0.0);
        let th = CovarianceMatrix::<f64>::thermal("A", 3.0).unwrap();
        assert!((von_neumann_entropy(&th).unwrap() - 2.0).abs() < 1e-13);
        for v in [1.5, 5.0, 40.0] {
            let epr = CovarianceMatrix::<f64>::two_mode_squeezed("A", "B", v).unwrap();
            assert!(von_neumann_entropy(&epr).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn sub_vacuum_state_is_unphysical() {
        let cm = CovarianceMatrix::<f64>::thermal("A", 0.5).unwrap();
        assert!(matches!(
            von_neumann_entropy(&cm),
            Err(Error::Unphysical { .. })
        ));
    }
}
