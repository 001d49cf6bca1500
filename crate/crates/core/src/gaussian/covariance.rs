use std::collections::HashSet;

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real symmetric `2n x 2n` covariance matrix of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real = f64> {
    matrix: DMatrix<T>,
    labels: Vec<String>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Validates shape, label uniqueness and symmetry, then stores the
    /// exactly symmetrised matrix.
    pub fn new<S: Into<String>>(matrix: DMatrix<T>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Validation("covariance matrix needs at least one mode".into()));
        }
        if !matrix.is_square() || matrix.nrows() != 2 * labels.len() {
            return Err(Error::Validation(format!(
                "matrix is {}x{} but {} mode labels were given",
                matrix.nrows(),
                matrix.ncols(),
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Validation(format!("duplicate mode label {l:?}")));
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }

        let scale = matrix.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
        let mut worst = T::zero();
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                worst = worst.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if worst > T::lit(T::SYMMETRY_TOL) * scale {
            return Err(Error::Validation(format!(
                "matrix is not symmetric (max |G_ij - G_ji| = {worst})"
            )));
        }
        let matrix = (&matrix + matrix.transpose()) * T::lit(0.5);
        Ok(Self { matrix, labels })
    }

    /// Product of vacua.
    pub fn vacuum<S: Into<String>>(labels: Vec<S>) -> Result<Self> {
        let n = labels.len();
        Self::new(DMatrix::identity(2 * n, 2 * n), labels)
    }

    /// Single thermal mode with quadrature variance `v`.
    pub fn thermal(label: &str, v: T) -> Result<Self> {
        Self::new(DMatrix::identity(2, 2) * v, vec![label])
    }

    /// Two-mode squeezed vacuum with local variance `v >= 1`.
    pub fn two_mode_squeezed(a: &str, b: &str, v: T) -> Result<Self> {
        if v < T::one() {
            return Err(Error::Domain(format!("EPR variance {v} below vacuum")));
        }
        let c = (v * v - T::one()).sqrt();
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            v,          T::zero(), c,          T::zero(),
            T::zero(),  v,         T::zero(),  -c,
            c,          T::zero(), v,          T::zero(),
            T::zero(),  -c,        T::zero(),  v,
        ]);
        Self::new(m, vec![a, b])
    }

    pub fn dim_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub(crate) fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| Error::Validation(format!("no mode labelled {label:?}")))
    }

    /// The 2x2 block between two modes.
    pub fn block(&self, row: &str, col: &str) -> Result<Matrix2<T>> {
        let (i, j) = (self.require(row)?, self.require(col)?);
        Ok(self.matrix.fixed_view::<2, 2>(2 * i, 2 * j).into_owned())
    }

    /// Quadrature row indices of the given modes, in the given order.
    pub(crate) fn quadrature_indices<S: AsRef<str>>(&self, modes: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(2 * modes.len());
        for m in modes {
            let i = self.require(m.as_ref())?;
            out.extend([2 * i, 2 * i + 1]);
        }
        Ok(out)
    }

    /// Reduced state on `keep` (partial trace), in the order given.
    pub fn reduce<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let idx = self.quadrature_indices(keep)?;
        let sub = self.matrix.select_rows(&idx).select_columns(&idx);
        Self::new(sub, keep.iter().map(|s| s.as_ref().to_string()).collect())
    }

    /// Tensor product of two independent states.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self.matrix.nrows(), other.matrix.nrows());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        m.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        let labels = self.labels.iter().chain(&other.labels).cloned().collect();
        Self::new(m, labels)
    }

    /// `S Γ Sᵀ` for a symplectic (or any linear) map `S` on all modes.
    pub fn transform(&self, s: &DMatrix<T>) -> Result<Self> {
        if s.nrows() != self.matrix.nrows() || !s.is_square() {
            return Err(Error::Validation(format!(
                "transform is {}x{}, state is {}x{}",
                s.nrows(),
                s.ncols(),
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        Self::new(s * &self.matrix * s.transpose(), self.labels.clone())
    }

    /// Same matrix, new labels.
    pub fn relabel<S: Into<String>>(&self, labels: Vec<S>) -> Result<Self> {
        Self::new(self.matrix.clone(), labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_matrix() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = 1e-3;
        assert!(matches!(
            CovarianceMatrix::new(m, vec!["A"]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn tiny_asymmetry_is_symmetrised() {
        let mut m = DMatrix::<f64>::identity(2, 2) * 3.0;
        m[(0, 1)] = 1e-13;
        let cm = CovarianceMatrix::new(m, vec!["A"]).unwrap();
        assert_eq!(cm.matrix()[(0, 1)], cm.matrix()[(1, 0)]);
    }

    #[test]
    fn rejects_duplicate_or_mismatched_labels() {
        let m = DMatrix::<f64>::identity(4, 4);
        assert!(CovarianceMatrix::new(m.clone(), vec!["A", "A"]).is_err());
        assert!(CovarianceMatrix::new(m, vec!["A"]).is_err());
    }

    #[test]
    fn reduce_follows_label_order() {
        let a = CovarianceMatrix::<f64>::thermal("A", 2.0).unwrap();
        let b = CovarianceMatrix::<f64>::thermal("B", 5.0).unwrap();
        let ab = a.direct_sum(&b).unwrap();
        let ba = ab.reduce(&["B", "A"]).unwrap();
        assert_eq!(ba.labels(), ["B", "A"]);
        assert_eq!(ba.matrix()[(0, 0)], 5.0);
        assert_eq!(ba.matrix()[(3, 3)], 2.0);
        assert!(ab.reduce(&["C"]).is_err());
    }

    #[test]
    fn epr_blocks() {
        let cm = CovarianceMatrix::<f64>::two_mode_squeezed("A", "B", 5.0).unwrap();
        let c = cm.block("A", "B").unwrap();
        assert!((c[(0, 0)] - 24f64.sqrt()).abs() < 1e-15);
        assert!((c[(1, 1)] + 24f64.sqrt()).abs() < 1e-15);
    }
}
