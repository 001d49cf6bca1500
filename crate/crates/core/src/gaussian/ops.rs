use nalgebra::{Cholesky, DMatrix};

use super::{symplectic_eigenvalues, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outcome of the uncertainty-relation check `Γ + iΩ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality<T: Real = f64> {
    pub physical: bool,
    /// `None` when `Γ` is not even positive definite.
    pub min_symplectic_eigenvalue: Option<T>,
}

pub fn check_physicality<T: Real>(cm: &CovarianceMatrix<T>) -> Physicality<T> {
    match symplectic_eigenvalues(cm) {
        Ok(spec) => {
            let min = spec.min();
            Physicality {
                physical: min >= T::one() - T::lit(T::PHYSICAL_TOL),
                min_symplectic_eigenvalue: Some(min),
            }
        }
        Err(_) => Physicality {
            physical: false,
            min_symplectic_eigenvalue: None,
        },
    }
}

/// State of the unmeasured modes after heterodyne detection of `measured`.
///
/// `Γ_R - Σ (Γ_M + I)⁻¹ Σᵀ`; the result does not depend on the outcome values.
pub fn condition_on_heterodyne<T: Real, S: AsRef<str>>(
    cm: &CovarianceMatrix<T>,
    measured: &[S],
) -> Result<CovarianceMatrix<T>> {
    if measured.is_empty() {
        return Err(Error::Validation("no modes to measure".into()));
    }
    let m_idx = cm.quadrature_indices(measured)?;
    let mut seen = std::collections::HashSet::new();
    if !measured.iter().all(|m| seen.insert(m.as_ref())) {
        return Err(Error::Validation("measured modes listed twice".into()));
    }
    let retained: Vec<String> = cm
        .labels()
        .iter()
        .filter(|l| !seen.contains(l.as_str()))
        .cloned()
        .collect();
    if retained.is_empty() {
        return Err(Error::Conditioning(
            "measuring every mode leaves no state".into(),
        ));
    }
    let r_idx = cm.quadrature_indices(&retained)?;

    let g = cm.matrix();
    let g_r = g.select_rows(&r_idx).select_columns(&r_idx);
    let g_m = g.select_rows(&m_idx).select_columns(&m_idx);
    let sigma = g.select_rows(&r_idx).select_columns(&m_idx);

    let shifted = &g_m + DMatrix::identity(m_idx.len(), m_idx.len());
    let chol = Cholesky::new(shifted)
        .ok_or_else(|| Error::Conditioning("Γ_M + I is not positive definite".into()))?;
    let x = chol.solve(&sigma.transpose());
    CovarianceMatrix::new(g_r - sigma * x, retained)
}

/// Beamsplitter of the given intensity transmittance between modes `i`
/// and `j` of an `n`-mode system: `a_i' = t a_i + r a_j`, `a_j' = -r a_i + t a_j`.
pub fn beamsplitter<T: Real>(n: usize, i: usize, j: usize, transmittance: T) -> Result<DMatrix<T>> {
    if i >= n || j >= n || i == j {
        return Err(Error::Validation(format!(
            "beamsplitter modes ({i}, {j}) invalid for {n} modes"
        )));
    }
    if !(transmittance >= T::zero() && transmittance <= T::one()) {
        return Err(Error::Domain(format!(
            "beamsplitter transmittance {transmittance} outside [0, 1]"
        )));
    }
    let t = transmittance.sqrt();
    let r = (T::one() - transmittance).sqrt();
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = t;
        s[(a, b)] = r;
        s[(b, a)] = -r;
        s[(b, b)] = t;
    }
    Ok(s)
}

/// Phase-space rotation by `theta` of a single mode.
pub fn single_mode_rotation<T: Real>(n: usize, mode: usize, theta: T) -> Result<DMatrix<T>> {
    if mode >= n {
        return Err(Error::Validation(format!("mode {mode} out of range")));
    }
    let (s, c) = theta.sin_cos();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    let k = 2 * mode;
    m[(k, k)] = c;
    m[(k, k + 1)] = s;
    m[(k + 1, k)] = -s;
    m[(k + 1, k + 1)] = c;
    Ok(m)
}

/// Phase-insensitive Gaussian channel on one mode: the mode's quadratures are
/// scaled by `√transmittance` and `added_noise` is added to its diagonal.
pub fn attenuate<T: Real>(
    cm: &CovarianceMatrix<T>,
    mode: &str,
    transmittance: T,
    added_noise: T,
) -> Result<CovarianceMatrix<T>> {
    if !(transmittance >= T::zero() && transmittance <= T::one()) {
        return Err(Error::Domain(format!("transmittance {transmittance} outside [0, 1]")));
    }
    if !(added_noise >= T::zero()) {
        return Err(Error::Domain(format!("added noise {added_noise} is negative")));
    }
    let k = cm.require(mode)?;
    let n = cm.dim_modes();
    let mut scale = DMatrix::identity(2 * n, 2 * n);
    scale[(2 * k, 2 * k)] = transmittance.sqrt();
    scale[(2 * k + 1, 2 * k + 1)] = transmittance.sqrt();
    let mut m = &scale * cm.matrix() * &scale;
    m[(2 * k, 2 * k)] += added_noise;
    m[(2 * k + 1, 2 * k + 1)] += added_noise;
    CovarianceMatrix::new(m, cm.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::symplectic_form;

    #[test]
    fn uncorrelated_vacua() {
        let cm = CovarianceMatrix::<f64>::vacuum(vec!["A", "B"]).unwrap();
        let c = condition_on_heterodyne(&cm, &["B"]).unwrap();
        assert_eq!(c.labels(), ["A"]);
        assert!((c.matrix() - DMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn epr_heterodyne_collapses_to_vacuum() {
        // (V(V+1) - (V²-1)) / (V+1) = 1 for both quadratures
        let cm = CovarianceMatrix::<f64>::two_mode_squeezed("A", "B", 5.0).unwrap();
        let c = condition_on_heterodyne(&cm, &["B"]).unwrap();
        assert!((c.matrix() - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn conditioning_guards() {
        let cm = CovarianceMatrix::<f64>::vacuum(vec!["A", "B"]).unwrap();
        assert!(matches!(
            condition_on_heterodyne(&cm, &["A", "B"]),
            Err(Error::Conditioning(_))
        ));
        assert!(condition_on_heterodyne::<f64, &str>(&cm, &[]).is_err());
        assert!(condition_on_heterodyne(&cm, &["C"]).is_err());
        assert!(condition_on_heterodyne(&cm, &["B", "B"]).is_err());
    }

    #[test]
    fn physicality_predicate() {
        let vac = CovarianceMatrix::<f64>::vacuum(vec!["A"]).unwrap();
        assert!(check_physicality(&vac).physical);
        let half = CovarianceMatrix::<f64>::thermal("A", 0.5).unwrap();
        let p = check_physicality(&half);
        assert!(!p.physical);
        assert!((p.min_symplectic_eigenvalue.unwrap() - 0.5).abs() < 1e-14);
        let zero = CovarianceMatrix::<f64>::new(DMatrix::zeros(2, 2), vec!["A"]).unwrap();
        assert_eq!(check_physicality(&zero).min_symplectic_eigenvalue, None);
    }

    #[test]
    fn beamsplitter_and_rotation_are_symplectic() {
        let o = symplectic_form::<f64>(3).unwrap();
        for s in [
            beamsplitter(3, 0, 2, 0.3).unwrap(),
            single_mode_rotation(3, 1, 0.7).unwrap(),
        ] {
            assert!((&s * &o * s.transpose() - &o).norm() < 1e-14);
        }
        assert!(beamsplitter::<f64>(2, 0, 0, 0.5).is_err());
        assert!(beamsplitter::<f64>(2, 0, 1, 1.5).is_err());
    }

    #[test]
    fn attenuation_matches_loss_channel() {
        let th = CovarianceMatrix::<f64>::thermal("A", 5.0).unwrap();
        let out = attenuate(&th, "A", 0.25, 0.75).unwrap();
        assert!((out.matrix()[(0, 0)] - 2.0).abs() < 1e-15);
        assert!(attenuate(&th, "A", 0.5, -0.1).is_err());
    }
}
