//! Square operators and validated density matrices.

use std::ops::Deref;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Tolerance applied to trace, Hermiticity and positivity of states.
pub const STATE_TOL: f64 = 1e-10;

/// A dense complex square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    mat: CMat,
}

impl DenseOperator {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_square(mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_defect(&self.mat) < tol
    }

    pub fn dagger(&self) -> Self {
        Self::from_square(linalg::dagger(&self.mat))
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, rho: &DensityMatrix) -> C64 {
        linalg::trace_product(rho.matrix(), &self.mat)
    }
}

impl Deref for DenseOperator {
    type Target = CMat;

    fn deref(&self) -> &CMat {
        &self.mat
    }
}

/// A density matrix: unit trace, Hermitian, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and the eigenvalue floor at [`STATE_TOL`].
    pub fn new(mat: CMat) -> Result<Self> {
        Self::with_tolerance(mat, STATE_TOL)
    }

    pub fn with_tolerance(mat: CMat, tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        let tr = linalg::trace(&mat);
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let herm = linalg::hermiticity_defect(&mat);
        if herm > tol {
            return Err(Error::InvalidState(format!("Hermiticity defect {herm:e}")));
        }
        let min = linalg::eigvalsh(&mat)?[0];
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix the caller has already validated or constructed exactly.
    pub(crate) fn new_unchecked(mat: CMat) -> Self {
        Self { mat }
    }

    /// `|ψ⟩⟨ψ|` for a normalised vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("state vector norm² {norm}")));
        }
        let d = psi.len();
        let mat = CMat::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj());
        Ok(Self { mat })
    }

    /// Diagonal state from a probability vector.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let d = probs.len();
        let mut mat = linalg::zeros(d);
        for (k, &p) in probs.iter().enumerate() {
            mat[[k, k]] = C64::new(p, 0.0);
        }
        Self::new(mat)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: linalg::identity(d).mapv(|z| z / d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.mat, &self.mat).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::eigvalsh(&self.mat)?.to_vec())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::eigvalsh(&self.mat)?[0])
    }

    pub fn expect(&self, op: &CMat) -> C64 {
        linalg::trace_product(&self.mat, op)
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        linalg::trace_distance(&self.mat, &other.mat)
    }
}

impl Deref for DensityMatrix {
    type Target = CMat;

    fn deref(&self) -> &CMat {
        &self.mat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_trace_and_negative_spectrum() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.4]).is_err());
        assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
        assert!(DensityMatrix::diagonal(&[0.3, 0.7]).is_ok());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = linalg::zeros(2);
        m[[0, 0]] = C64::new(0.5, 0.0);
        m[[1, 1]] = C64::new(0.5, 0.0);
        m[[0, 1]] = C64::new(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidState(_))));
    }

    #[test]
    fn pure_state_has_unit_purity() {
        let s = 0.5f64.sqrt();
        let rho = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(0.0, s)]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-14);
    }
}
