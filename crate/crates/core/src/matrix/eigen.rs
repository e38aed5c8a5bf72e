use nalgebra::{Schur, SymmetricEigen as NaSymmetricEigen};
use num_complex::Complex64;

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100_000;

/// All eigenvalues of a square matrix, in no particular order.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NoConvergence);
    }
    match m.rows() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(m[(0, 0)], 0.0)]),
        _ => {}
    }
    let schur = Schur::try_new(m.to_nalgebra(), f64::EPSILON, MAX_SWEEPS).ok_or(Error::NoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// `max |λ|` over the eigenvalues of `m`.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().fold(0.0_f64, |acc, z| acc.max(z.norm())))
}

/// Eigen-decomposition of a symmetric matrix: `m = V diag(values) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column.
    pub vectors: Matrix,
}

pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "symmetric eigen needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let e = NaSymmetricEigen::try_new(m.symmetrize().to_nalgebra(), f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence)?;
    Ok(SymmetricEigen {
        values: e.eigenvalues.iter().copied().collect(),
        vectors: Matrix::from_nalgebra(&e.eigenvectors),
    })
}
