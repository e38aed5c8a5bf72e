use nalgebra::DMatrix;

use super::{Matrix, RANK_TOL};
use crate::error::{Error, Result};

fn check_square(a: &Matrix, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )))
    }
}

fn factor(a: &Matrix) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    check_square(a, "LU")?;
    let lu = a.to_nalgebra().lu();
    let floor = RANK_TOL * a.max_abs();
    let u = lu.u();
    let small = (0..a.rows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if a.rows() > 0 && (small <= floor || small == 0.0) {
        return Err(Error::SingularMatrix { pivot: small });
    }
    Ok(lu)
}

fn solve_with(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    lu.solve(b).ok_or(Error::SingularMatrix { pivot: 0.0 })
}

fn check_rhs(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() == b.rows() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "lhs has {} rows, rhs has {}",
            a.rows(),
            b.rows()
        )))
    }
}

/// Solves `a · x = b` by LU factorization with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_rhs(a, b)?;
    let lu = factor(a)?;
    Ok(Matrix::from_nalgebra(&solve_with(&lu, &b.to_nalgebra())?))
}

/// [`solve_linear`] followed by a few rounds of iterative refinement on the residual.
pub fn solve_refined(a: &Matrix, b: &Matrix, rounds: usize) -> Result<Matrix> {
    check_rhs(a, b)?;
    let lu = factor(a)?;
    let mut x = Matrix::from_nalgebra(&solve_with(&lu, &b.to_nalgebra())?);
    for _ in 0..rounds {
        let r = b - &(a * &x);
        if r.max_abs() == 0.0 {
            break;
        }
        x += &Matrix::from_nalgebra(&solve_with(&lu, &r.to_nalgebra())?);
    }
    Ok(x)
}

/// Solves `a · x = b` for symmetric positive definite `a` by Cholesky factorization.
///
/// Unlike [`solve_linear`] this accepts badly conditioned matrices as long as
/// they stay positive definite.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_rhs(a, b)?;
    let chol = nalgebra::Cholesky::new(a.symmetrize().to_nalgebra()).ok_or(Error::SingularMatrix { pivot: 0.0 })?;
    Ok(Matrix::from_nalgebra(&chol.solve(&b.to_nalgebra())))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_linear(a, &Matrix::identity(a.rows()))
}

/// Numerical rank: singular values above `tol · max|a|` count.
pub fn rank(a: &Matrix, tol: f64) -> usize {
    let scale = a.max_abs();
    if scale == 0.0 || a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    a.to_nalgebra().rank(tol * scale)
}

/// Orthonormal basis (one column per vector) of `{x : a x = 0}`.
///
/// Singular values at or below `tol · σ_max` count as zero.
pub fn null_space(a: &Matrix, tol: f64) -> Matrix {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Matrix::zeros(0, 0);
    }
    if a.max_abs() == 0.0 || rows == 0 {
        return Matrix::identity(cols);
    }
    // pad so the thin SVD returns a full right basis
    let padded = if rows < cols { a.vstack(&Matrix::zeros(cols - rows, cols)) } else { a.clone() };
    let svd = padded.to_nalgebra().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..cols).filter(|&i| svd.singular_values[i] <= tol * smax).collect();
    let mut out = Matrix::zeros(cols, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        for j in 0..cols {
            out[(j, k)] = vt[(i, j)];
        }
    }
    out
}

/// 2-norm condition number `σ_max / σ_min`; infinite for singular input.
pub fn condition_number(a: &Matrix) -> f64 {
    if a.rows() == 0 {
        return 1.0;
    }
    let sv = a.to_nalgebra().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
