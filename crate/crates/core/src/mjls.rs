//! Markov jump form of the plant and the second-moment operators on mode tuples.
//!
//! With `Γ_θ = diag(γ(θ))` the received measurement is
//! `y_r(k) = H_θ x(k) + D_θ v(k)` where `H_θ = Γ_θ C` and `D_θ = Γ_θ`.
//!
//! Gain tables hold the estimator gains `K_i` of
//! `x̂(k+1) = A x̂(k) + K_θ (y_r(k) − H_θ x̂(k))`, so the error evolves by
//! `A − K_θ H_θ`. Operators that take a gain table use that closed loop.

use serde::{Deserialize, Serialize};

use crate::channels::{joint_tpm, mode_gamma, ChannelParams, JointChain};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_inner, kron, psd_check, spectral_radius, Matrix, SYMMETRY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    pub a: Matrix,
    /// One row per sensor / channel.
    pub c: Matrix,
    /// Process-noise covariance.
    pub q: Matrix,
    /// Diagonal of the measurement-noise covariance.
    pub r_diag: Vec<f64>,
    pub x0_mean: Vec<f64>,
    pub x0_cov: Matrix,
}

impl PlantModel {
    /// Plant with zero initial mean and identity initial covariance.
    pub fn new(a: Matrix, c: Matrix, q: Matrix, r_diag: Vec<f64>) -> Result<Self> {
        let n = a.rows();
        let plant = Self {
            a,
            c,
            q,
            r_diag,
            x0_mean: vec![0.0; n],
            x0_cov: Matrix::identity(n),
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    pub fn r(&self) -> Matrix {
        Matrix::diag(&self.r_diag)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(format!(
                    "{what} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            }
        };
        dim("A", self.a.shape(), (n, n))?;
        dim("C", self.c.shape(), (self.c.rows(), n))?;
        dim("Q", self.q.shape(), (n, n))?;
        dim("x0_cov", self.x0_cov.shape(), (n, n))?;
        if self.r_diag.len() != self.c.rows() {
            return Err(Error::DimensionMismatch(format!(
                "R has {} diagonal entries for {} outputs",
                self.r_diag.len(),
                self.c.rows()
            )));
        }
        if self.x0_mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x0_mean has {} entries, state dimension is {n}",
                self.x0_mean.len()
            )));
        }
        for m in [&self.a, &self.c, &self.q, &self.x0_cov] {
            if !m.is_finite() {
                return Err(Error::InvalidModel("non-finite matrix entry".into()));
            }
        }
        if self.r_diag.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidModel("R must have a strictly positive diagonal".into()));
        }
        if self.x0_mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite initial mean".into()));
        }
        if !psd_check(&self.q, SYMMETRY_TOL) {
            return Err(Error::InvalidModel("Q is not symmetric positive semidefinite".into()));
        }
        if !psd_check(&self.x0_cov, SYMMETRY_TOL) {
            return Err(Error::InvalidModel("x0_cov is not symmetric positive semidefinite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpModel {
    pub plant: PlantModel,
    pub chain: JointChain,
    /// `H_θ = Γ_θ C`, indexed by `θ − 1`.
    pub h: Vec<Matrix>,
    /// `D_θ = Γ_θ`, indexed by `θ − 1`.
    pub d: Vec<Matrix>,
}

impl JumpModel {
    pub fn mode_count(&self) -> usize {
        self.h.len()
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.plant.output_dim()
    }

    pub fn mu(&self) -> &[f64] {
        &self.chain.mu
    }

    /// Same channels and output map, different dynamics and noise.
    pub fn with_noise(&self, q: Matrix, r_diag: Vec<f64>) -> Result<Self> {
        let mut plant = self.plant.clone();
        plant.q = q;
        plant.r_diag = r_diag;
        assemble(&plant, &self.chain.channels)
    }
}

pub fn assemble(plant: &PlantModel, chs: &[ChannelParams]) -> Result<JumpModel> {
    plant.validate()?;
    let m = plant.output_dim();
    if chs.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} channels for {m} sensor rows",
            chs.len()
        )));
    }
    let chain = joint_tpm(chs)?;
    let mut h = Vec::with_capacity(chain.mode_count());
    let mut d = Vec::with_capacity(chain.mode_count());
    for theta in 1..=chain.mode_count() {
        let gamma = Matrix::diag(&mode_gamma(theta, m)?.iter().map(|&g| f64::from(u8::from(g))).collect::<Vec<_>>());
        h.push(&gamma * &plant.c);
        d.push(gamma);
    }
    Ok(JumpModel {
        plant: plant.clone(),
        chain,
        h,
        d,
    })
}

/// Mode-indexed estimator gains `K_1..K_N` (each `n × m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    pub gains: Vec<Matrix>,
}

impl GainTable {
    pub fn zeros(modes: usize, n: usize, m: usize) -> Self {
        Self {
            gains: vec![Matrix::zeros(n, m); modes],
        }
    }

    /// The same gain in every mode.
    pub fn uniform(gain: Matrix, modes: usize) -> Self {
        Self {
            gains: vec![gain; modes],
        }
    }

    /// `A − K_i H_i` for zero-based mode `i`.
    pub fn closed_loop(&self, model: &JumpModel, i: usize) -> Matrix {
        &model.plant.a - &(&self.gains[i] * &model.h[i])
    }

    fn check(&self, model: &JumpModel) -> Result<()> {
        let want = (model.state_dim(), model.output_dim());
        if self.gains.len() != model.mode_count() || self.gains.iter().any(|k| k.shape() != want) {
            return Err(Error::DimensionMismatch(format!(
                "gain table needs {} gains of size {}x{}",
                model.mode_count(),
                want.0,
                want.1
            )));
        }
        Ok(())
    }
}

/// `⟨V, S⟩ = Σ_i tr(V_i' S_i)`.
pub fn inner(v: &[Matrix], s: &[Matrix]) -> f64 {
    assert_eq!(v.len(), s.len());
    v.iter().zip(s).map(|(a, b)| frobenius_inner(a, b)).sum()
}

fn forward(model: &JumpModel, f: &[Matrix], v: &[Matrix]) -> Vec<Matrix> {
    let n = model.state_dim();
    let moved: Vec<Matrix> = f.iter().zip(v).map(|(fi, vi)| fi.congruence(vi)).collect();
    (0..model.mode_count())
        .map(|j| {
            let mut out = Matrix::zeros(n, n);
            for (i, m) in moved.iter().enumerate() {
                out += &m.scale(model.chain.p(i, j));
            }
            out
        })
        .collect()
}

fn backward(model: &JumpModel, f: &[Matrix], v: &[Matrix]) -> Vec<Matrix> {
    let n = model.state_dim();
    (0..model.mode_count())
        .map(|i| {
            let mut mix = Matrix::zeros(n, n);
            for (j, vj) in v.iter().enumerate() {
                mix += &vj.scale(model.chain.p(i, j));
            }
            f[i].transpose().congruence(&mix)
        })
        .collect()
}

/// `𝓛_j(V) = Σ_i p_ij A V_i A'`.
pub fn apply_cal_l(model: &JumpModel, v: &[Matrix]) -> Vec<Matrix> {
    forward(model, &vec![model.plant.a.clone(); model.mode_count()], v)
}

/// `𝓛*_i(V) = Σ_j p_ij A' V_j A`.
pub fn apply_cal_l_star(model: &JumpModel, v: &[Matrix]) -> Vec<Matrix> {
    backward(model, &vec![model.plant.a.clone(); model.mode_count()], v)
}

fn closed_loops(model: &JumpModel, gains: &GainTable) -> Vec<Matrix> {
    (0..model.mode_count()).map(|i| gains.closed_loop(model, i)).collect()
}

/// `𝓛̃_j(V) = Σ_i p_ij (A − K_i H_i) V_i (A − K_i H_i)'`.
pub fn apply_tilde_l(model: &JumpModel, gains: &GainTable, v: &[Matrix]) -> Vec<Matrix> {
    forward(model, &closed_loops(model, gains), v)
}

/// `𝓛̃*_i(V) = Σ_j p_ij (A − K_i H_i)' V_j (A − K_i H_i)`.
pub fn apply_tilde_l_star(model: &JumpModel, gains: &GainTable, v: &[Matrix]) -> Vec<Matrix> {
    backward(model, &closed_loops(model, gains), v)
}

/// `(P' ⊗ I_{n²}) · blockdiag(F_i ⊗ F_i)` with `F_i = A − K_i H_i`: the
/// matrix of `𝓛̃` acting on stacked `vec(V_i)`.
pub fn closed_loop_operator_matrix(model: &JumpModel, gains: &GainTable) -> Result<Matrix> {
    gains.check(model)?;
    let n2 = model.state_dim().pow(2);
    let modes = model.mode_count();
    let mut out = Matrix::zeros(modes * n2, modes * n2);
    for i in 0..modes {
        let f = gains.closed_loop(model, i);
        let ff = kron(&f, &f);
        for j in 0..modes {
            let p = model.chain.p(i, j);
            if p != 0.0 {
                out.set_block(j * n2, i * n2, &ff.scale(p));
            }
        }
    }
    Ok(out)
}

/// Spectral radius of the closed-loop second-moment operator.
pub fn closed_loop_radius(model: &JumpModel, gains: &GainTable) -> Result<f64> {
    spectral_radius(&closed_loop_operator_matrix(model, gains)?)
}

/// Mean-square stability of the error dynamics `A − K_θ H_θ`.
pub fn ms_stable(model: &JumpModel, gains: &GainTable) -> Result<bool> {
    Ok(closed_loop_radius(model, gains)? < 1.0)
}
