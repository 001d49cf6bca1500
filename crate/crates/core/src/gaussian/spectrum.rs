use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use super::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symplectic eigenvalues of an `n`-mode state, sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpectrum<T: Real = f64> {
    values: Vec<T>,
}

impl<T: Real> SymplecticSpectrum<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> T {
        *self.values.last().expect("spectrum has at least one mode")
    }

    pub fn max(&self) -> T {
        self.values[0]
    }

    /// All eigenvalues within the physicality tolerance of 1.
    pub fn is_pure(&self) -> bool {
        let tol = T::lit(T::PHYSICAL_TOL);
        self.values.iter().all(|v| (*v - T::one()).abs() <= tol)
    }
}

/// Standard symplectic form with `[[0, 1], [-1, 0]]` blocks on the diagonal.
pub fn symplectic_form<T: Real>(n: usize) -> Result<DMatrix<T>> {
    if n == 0 {
        return Err(Error::Domain("symplectic form needs n >= 1".into()));
    }
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        omega[(2 * j, 2 * j + 1)] = T::one();
        omega[(2 * j + 1, 2 * j)] = -T::one();
    }
    Ok(omega)
}

/// Moduli of the eigenvalues of `iΩΓ`.
///
/// With `Γ = L Lᵀ`, `ΩΓ` is similar to the real antisymmetric matrix
/// `K = Lᵀ Ω L` whose eigenvalues are `±iν_j`; the symmetric matrix `KᵀK`
/// then carries every `ν_j²` twice.
pub fn symplectic_eigenvalues<T: Real>(cm: &CovarianceMatrix<T>) -> Result<SymplecticSpectrum<T>> {
    let n = cm.dim_modes();
    let gamma = cm.matrix();
    let chol = Cholesky::new(gamma.clone())
        .ok_or_else(|| Error::Validation("covariance matrix is not positive definite".into()))?;
    let l = chol.l();
    let omega = symplectic_form::<T>(n)?;
    let k = l.transpose() * omega * &l;
    let kk = k.transpose() * &k;
    let kk = (&kk + kk.transpose()) * T::lit(0.5);

    let eig = SymmetricEigen::try_new(kk, T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::numerical("symmetric eigen-solver did not converge", gamma))?;
    let mut sq: Vec<T> = eig.eigenvalues.iter().copied().collect();
    sq.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));

    let values = sq
        .chunks_exact(2)
        .map(|pair| ((pair[0].max(T::zero())).sqrt() + (pair[1].max(T::zero())).sqrt()) * T::lit(0.5))
        .collect();
    Ok(SymplecticSpectrum { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_blocks() {
        let o = symplectic_form::<f64>(2).unwrap();
        #[rustfmt::skip]
        let want = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, -1.0, 0.0,
        ]);
        assert_eq!(o, want);
        assert!(symplectic_form::<f64>(0).is_err());
    }

    #[test]
    fn omega_squares_to_minus_identity() {
        for n in 1..6 {
            let o = symplectic_form::<f64>(n).unwrap();
            assert_eq!(&o * &o, -DMatrix::identity(2 * n, 2 * n));
            assert_eq!(&o * o.transpose(), DMatrix::identity(2 * n, 2 * n));
            assert_eq!(o.transpose(), -o);
        }
    }

    #[test]
    fn vacuum_and_thermal() {
        let vac = CovarianceMatrix::<f64>::vacuum(vec!["A", "B", "C"]).unwrap();
        let s = symplectic_eigenvalues(&vac).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-14));

        let th = CovarianceMatrix::<f64>::thermal("A", 3.0).unwrap();
        assert!((symplectic_eigenvalues(&th).unwrap().max() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn epr_is_pure() {
        let cm = CovarianceMatrix::<f64>::two_mode_squeezed("A", "B", 5.0).unwrap();
        let s = symplectic_eigenvalues(&cm).unwrap();
        assert!(s.is_pure(), "{:?}", s);
    }

    #[test]
    fn sorted_descending() {
        let a = CovarianceMatrix::<f64>::thermal("A", 2.0).unwrap();
        let b = CovarianceMatrix::<f64>::thermal("B", 7.0).unwrap();
        let c = CovarianceMatrix::<f64>::thermal("C", 4.0).unwrap();
        let s = symplectic_eigenvalues(&a.direct_sum(&b).unwrap().direct_sum(&c).unwrap()).unwrap();
        let v = s.values();
        assert!((v[0] - 7.0).abs() < 1e-13 && (v[1] - 4.0).abs() < 1e-13 && (v[2] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn non_positive_definite_is_rejected() {
        let cm = CovarianceMatrix::<f64>::new(DMatrix::zeros(2, 2), vec!["A"]).unwrap();
        assert!(matches!(symplectic_eigenvalues(&cm), Err(Error::Validation(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let cm = CovarianceMatrix::<f32>::two_mode_squeezed("A", "B", 5.0).unwrap();
        let s = symplectic_eigenvalues(&cm).unwrap();
        assert!(s.is_pure(), "{:?}", s);
    }
}
