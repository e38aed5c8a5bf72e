//! Block lower-triangular ("Wonham") form of a multi-output pair `(C, A)`.
//!
//! In the new coordinates `x = T x̃`:
//!
//! ```text
//! T⁻¹ A T = [A_1              ]      C T = [c_1          ]
//!           [A_21  A_2        ]            [     c_2     ]
//!           [ ⋮          ⋱    ]            [         ⋱   ]
//!           [A_m1  …      A_m ]            [          c_m]
//! ```
//!
//! so sensor `i` sees only block `i`, and block `i` is driven only by blocks `< i`.
//!
//! Construction runs from the last block backwards. In the current space the
//! last block is the unobservable subspace of the remaining earlier sensors
//! (the largest `A`-invariant subspace they cannot see). Its complement is taken
//! inside the kernel of the current sensor so that sensor is block diagonal,
//! and the procedure recurses on the quotient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{condition_number, inverse, null_space, spectral_radius, Matrix};

/// Default relative tolerance for subspace and zero-pattern decisions.
pub const WONHAM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WonhamForm {
    /// Similarity transform, columns grouped by block.
    pub t: Matrix,
    pub t_inv: Matrix,
    pub condition: f64,
    pub block_sizes: Vec<usize>,
    /// `T⁻¹ A T`.
    pub a_transformed: Matrix,
    /// `C T`.
    pub c_transformed: Matrix,
}

impl WonhamForm {
    pub fn block_count(&self) -> usize {
        self.block_sizes.len()
    }

    fn offset(&self, i: usize) -> usize {
        self.block_sizes[..i].iter().sum()
    }

    /// Diagonal block `A_i` (zero-based).
    pub fn a_block(&self, i: usize) -> Matrix {
        let (o, s) = (self.offset(i), self.block_sizes[i]);
        self.a_transformed.block(o, o, s, s)
    }

    /// Coupling block `A_ij` with `j < i`.
    pub fn coupling(&self, i: usize, j: usize) -> Matrix {
        self.a_transformed
            .block(self.offset(i), self.offset(j), self.block_sizes[i], self.block_sizes[j])
    }

    /// Output row `c_i` restricted to block `i`.
    pub fn c_row(&self, i: usize) -> Matrix {
        self.c_transformed.block(i, self.offset(i), 1, self.block_sizes[i])
    }

    /// Diagonal blocks of `T⁻¹ Q T⁻ᵀ`, the process noise seen by each block.
    pub fn noise_blocks(&self, q: &Matrix) -> Vec<Matrix> {
        let qt = self.t_inv.congruence(q);
        (0..self.block_count())
            .map(|i| {
                let (o, s) = (self.offset(i), self.block_sizes[i]);
                qt.block(o, o, s, s).symmetrize()
            })
            .collect()
    }
}

/// Unobservable subspace of `(rows, a)` as an orthonormal basis.
pub fn unobservable_subspace(rows: &Matrix, a: &Matrix, tol: f64) -> Matrix {
    let d = a.rows();
    if rows.rows() == 0 {
        return Matrix::identity(d);
    }
    let mut obs = rows.clone();
    let mut layer = rows.clone();
    for _ in 1..d {
        layer = &layer * a;
        obs = obs.vstack(&layer);
    }
    null_space(&obs, tol)
}

/// `(c, a)` is detectable: `A` restricted to the unobservable subspace is Schur stable.
pub fn pair_detectable(c: &Matrix, a: &Matrix, tol: f64) -> Result<bool> {
    let n = unobservable_subspace(c, a, tol);
    if n.cols() == 0 {
        return Ok(true);
    }
    // N is A-invariant and orthonormal, so Nᵀ A N is the restriction
    Ok(spectral_radius(&(&(&n.transpose() * a) * &n))? < 1.0)
}

fn normalize_signs(basis: &mut Matrix) {
    for j in 0..basis.cols() {
        let (mut big, mut sign) = (0.0, 1.0);
        for i in 0..basis.rows() {
            if basis[(i, j)].abs() > big + 1e-12 {
                big = basis[(i, j)].abs();
                sign = basis[(i, j)].signum();
            }
        }
        if sign < 0.0 {
            for i in 0..basis.rows() {
                basis[(i, j)] = -basis[(i, j)];
            }
        }
    }
}

pub fn wonham_decompose(a: &Matrix, c: &Matrix, tol: f64) -> Result<WonhamForm> {
    let n = a.rows();
    let m = c.rows();
    if !a.is_square() || c.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, C is {}x{}",
            a.rows(),
            a.cols(),
            c.rows(),
            c.cols()
        )));
    }
    if m > n {
        return Err(Error::TooManyOutputs { outputs: m, states: n });
    }
    if m == 0 {
        return Err(Error::InvalidModel("at least one output is required".into()));
    }

    let mut a_cur = a.clone();
    let mut c_cur = c.clone();
    let mut phi = Matrix::identity(n);
    let mut blocks: Vec<Matrix> = vec![Matrix::zeros(n, 0); m];
    for k in (0..m).rev() {
        let d = a_cur.rows();
        let earlier = c_cur.select_rows(&(0..k).collect::<Vec<_>>());
        let w = if k == 0 {
            Matrix::identity(d)
        } else {
            unobservable_subspace(&earlier, &a_cur, tol)
        };
        if w.cols() == 0 {
            return Err(Error::NoDecomposition { output: k + 1 });
        }
        let ck = c_cur.select_rows(&[k]);
        let ck_w = &ck * &w;
        if ck_w.max_abs() <= tol * ck.max_abs().max(1.0) {
            return Err(Error::NoDecomposition { output: k + 1 });
        }
        let mut block = &phi * &w;
        normalize_signs(&mut block);
        blocks[k] = block;
        if k == 0 {
            if w.cols() != d {
                return Err(Error::NoDecomposition { output: 1 });
            }
            break;
        }
        // complement of W inside ker c_k
        let ker = null_space(&ck, tol);
        let shared = &w * &null_space(&ck_w, tol);
        let v = if shared.cols() == 0 {
            ker
        } else {
            &ker * &null_space(&(&shared.transpose() * &ker), tol)
        };
        if v.cols() + w.cols() != d {
            return Err(Error::NoDecomposition { output: k + 1 });
        }
        let basis = v.hstack(&w);
        let moved = &(&inverse(&basis)? * &a_cur) * &basis;
        let q = v.cols();
        a_cur = moved.block(0, 0, q, q);
        c_cur = &c_cur * &v;
        phi = &phi * &v;
    }

    let mut t = blocks[0].clone();
    for b in &blocks[1..] {
        t = t.hstack(b);
    }
    let t_inv = inverse(&t)?;
    let block_sizes = blocks.iter().map(Matrix::cols).collect();
    let wf = WonhamForm {
        condition: condition_number(&t),
        a_transformed: &(&t_inv * a) * &t,
        c_transformed: c * &t,
        t,
        t_inv,
        block_sizes,
    };
    for i in 0..m {
        if !pair_detectable(&wf.c_row(i), &wf.a_block(i), tol)? {
            return Err(Error::NotDetectable(format!("block {} has an unobservable unstable mode", i + 1)));
        }
    }
    Ok(wf)
}

/// Zero pattern of the block form plus detectability of every diagonal pair.
///
/// `a` and `c` are the already transformed matrices.
pub fn verify_wonham_form(a: &Matrix, c: &Matrix, block_sizes: &[usize], tol: f64) -> bool {
    let n = a.rows();
    if !a.is_square() || c.cols() != n || c.rows() != block_sizes.len() || block_sizes.iter().sum::<usize>() != n {
        return false;
    }
    if block_sizes.contains(&0) {
        return false;
    }
    let mut owner = Vec::with_capacity(n);
    for (b, &s) in block_sizes.iter().enumerate() {
        owner.extend(std::iter::repeat_n(b, s));
    }
    let a_tol = tol * a.max_abs().max(1.0);
    let c_tol = tol * c.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..n {
            if owner[j] > owner[i] && a[(i, j)].abs() > a_tol {
                return false;
            }
        }
    }
    for r in 0..c.rows() {
        for j in 0..n {
            if owner[j] != r && c[(r, j)].abs() > c_tol {
                return false;
            }
        }
    }
    let mut o = 0;
    for (b, &s) in block_sizes.iter().enumerate() {
        let ab = a.block(o, o, s, s);
        let cb = c.block(b, o, 1, s);
        if cb.max_abs() <= c_tol || !pair_detectable(&cb, &ab, tol).unwrap_or(false) {
            return false;
        }
        o += s;
    }
    true
}
