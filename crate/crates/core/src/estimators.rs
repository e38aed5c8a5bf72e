//! Runnable estimators and their theoretical error covariances.
//!
//! All three share the predictor recursion
//! `x̂(k+1) = A x̂(k) + K (y_r(k) − H_θ x̂(k))` and differ in where `K` comes from:
//!
//! * OS: one gain per joint mode, from the coupled Riccati solution,
//! * LOS: one constant block-diagonal gain built from per-sensor two-mode solves,
//! * TVKF: a Kalman gain recomputed online from the received rows only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::mode_index;
use crate::detect::WonhamForm;
use crate::error::{Error, Result};
use crate::matrix::{solve_linear, Matrix};
use crate::mjls::{GainTable, JumpModel};
use crate::riccati::{coupled_lyapunov, sub_care_solve, sum, verify_stabilizing, CareSolution, CdreConfig, CdreInit, SubCareSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Os,
    Los,
    Tvkf,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Os, EstimatorKind::Los, EstimatorKind::Tvkf];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Os => "os",
            EstimatorKind::Los => "los",
            EstimatorKind::Tvkf => "tvkf",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "os" => Ok(EstimatorKind::Os),
            "los" => Ok(EstimatorKind::Los),
            "tvkf" => Ok(EstimatorKind::Tvkf),
            other => Err(Error::InvalidModel(format!("unknown estimator `{other}` (expected os, los or tvkf)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    pub kind: EstimatorKind,
    pub model: JumpModel,
    /// Per-mode gains. Empty for TVKF.
    pub gain_table: GainTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub xhat: Vec<f64>,
    pub k: usize,
    /// Running error covariance (TVKF only).
    pub tvkf_cov: Option<Matrix>,
}

impl Estimator {
    /// State at `k = 0`: `x̂(0)` is the initial mean.
    pub fn initial_state(&self) -> EstimatorState {
        EstimatorState {
            xhat: self.model.plant.x0_mean.clone(),
            k: 0,
            tvkf_cov: (self.kind == EstimatorKind::Tvkf).then(|| self.model.plant.x0_cov.clone()),
        }
    }
}

pub fn build_os(model: &JumpModel, sol: &CareSolution) -> Result<Estimator> {
    if !verify_stabilizing(model, &sol.y) {
        return Err(Error::NotStabilizing);
    }
    Ok(Estimator {
        kind: EstimatorKind::Os,
        model: model.clone(),
        gain_table: sol.gains.clone(),
    })
}

/// LOS estimator from per-block solutions: `K = T · blockdiag(ℓ_1, …, ℓ_m)`.
pub fn build_los(model: &JumpModel, wf: &WonhamForm, subsols: &[SubCareSolution]) -> Result<Estimator> {
    let n = model.state_dim();
    let m = model.output_dim();
    if subsols.len() != m || wf.block_count() != m || wf.t.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} block solutions and {} blocks for {m} sensors",
            subsols.len(),
            wf.block_count()
        )));
    }
    let mut bar = Matrix::zeros(n, m);
    let mut offset = 0;
    for (i, (sub, &size)) in subsols.iter().zip(&wf.block_sizes).enumerate() {
        if sub.gain.shape() != (size, 1) {
            return Err(Error::DimensionMismatch(format!("block {} gain has the wrong size", i + 1)));
        }
        if !(sub.rho_closed < 1.0) {
            return Err(Error::SubsystemUndetectable { block: i + 1 });
        }
        bar.set_block(offset, i, &sub.gain);
        offset += size;
    }
    Ok(Estimator {
        kind: EstimatorKind::Los,
        model: model.clone(),
        gain_table: GainTable::uniform(&wf.t * &bar, model.mode_count()),
    })
}

/// Solves every block's two-mode equations and builds the LOS estimator.
///
/// Block `i` sees the noise `(T⁻¹ Q T⁻ᵀ)_ii` and its own sensor's `R_ii`.
/// A block whose noise leaves unstable modes unexcited has a non-stabilizing
/// solution at zero, so such blocks are retried from a positive start.
pub fn solve_los(model: &JumpModel, wf: &WonhamForm, cfg: &CdreConfig) -> Result<(Estimator, Vec<SubCareSolution>)> {
    let noise = wf.noise_blocks(&model.plant.q);
    let retry = CdreConfig {
        init: CdreInit::StationaryPrior,
        ..*cfg
    };
    let mut subs = Vec::with_capacity(wf.block_count());
    for (i, ch) in model.chain.channels.iter().enumerate() {
        let solve = |c: &CdreConfig| {
            sub_care_solve(&wf.a_block(i), &wf.c_row(i), ch, &noise[i], model.plant.r_diag[i], c).map_err(|e| match e {
                Error::Diverged { .. } | Error::NotConverged { .. } => Error::SubsystemUndetectable { block: i + 1 },
                other => other,
            })
        };
        let mut sub = solve(cfg)?;
        if !(sub.rho_closed < 1.0) && cfg.init != CdreInit::StationaryPrior {
            sub = solve(&retry)?;
        }
        if !(sub.rho_closed < 1.0) {
            return Err(Error::SubsystemUndetectable { block: i + 1 });
        }
        subs.push(sub);
    }
    Ok((build_los(model, wf, &subs)?, subs))
}

pub fn build_tvkf(model: &JumpModel) -> Estimator {
    Estimator {
        kind: EstimatorKind::Tvkf,
        model: model.clone(),
        gain_table: GainTable { gains: Vec::new() },
    }
}

fn check_io(est: &Estimator, st: &EstimatorState, y_r: &[f64], gamma: &[bool]) -> Result<()> {
    let (n, m) = (est.model.state_dim(), est.model.output_dim());
    if st.xhat.len() != n || y_r.len() != m || gamma.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "step expects x̂ of length {n} and {m} measurements / arrival bits"
        )));
    }
    Ok(())
}

/// One step of the jump estimator. TVKF estimators are routed to [`tvkf_step`].
pub fn step(est: &Estimator, st: &EstimatorState, y_r: &[f64], gamma: &[bool]) -> Result<EstimatorState> {
    if est.kind == EstimatorKind::Tvkf {
        return tvkf_step(est, st, y_r, gamma);
    }
    check_io(est, st, y_r, gamma)?;
    let mode = mode_index(gamma) - 1;
    let h = &est.model.h[mode];
    let predicted = h.mul_vec(&st.xhat);
    let innovation: Vec<f64> = y_r.iter().zip(&predicted).map(|(y, p)| y - p).collect();
    let correction = est.gain_table.gains[mode].mul_vec(&innovation);
    let xhat = est
        .model
        .plant
        .a
        .mul_vec(&st.xhat)
        .iter()
        .zip(&correction)
        .map(|(a, c)| a + c)
        .collect();
    Ok(EstimatorState {
        xhat,
        k: st.k + 1,
        tvkf_cov: None,
    })
}

/// Time-varying Kalman predictor using only the rows that arrived.
pub fn tvkf_step(est: &Estimator, st: &EstimatorState, y_r: &[f64], gamma: &[bool]) -> Result<EstimatorState> {
    check_io(est, st, y_r, gamma)?;
    let plant = &est.model.plant;
    let a = &plant.a;
    let p = st
        .tvkf_cov
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("TVKF state carries no covariance".into()))?;
    let received: Vec<usize> = gamma.iter().enumerate().filter(|(_, &g)| g).map(|(i, _)| i).collect();
    let mut xhat = a.mul_vec(&st.xhat);
    let mut next = &a.congruence(p) + &plant.q;
    if !received.is_empty() {
        let cs = plant.c.select_rows(&received);
        let rs = Matrix::diag(&received.iter().map(|&i| plant.r_diag[i]).collect::<Vec<_>>());
        let pc = p * &cs.transpose();
        let s = &(&cs * &pc) + &rs;
        let apc = a * &pc;
        let gain = solve_linear(&s.transpose(), &apc.transpose())?.transpose();
        let predicted = cs.mul_vec(&st.xhat);
        let innovation: Vec<f64> = received.iter().zip(&predicted).map(|(&i, pr)| y_r[i] - pr).collect();
        for (x, c) in xhat.iter_mut().zip(gain.mul_vec(&innovation)) {
            *x += c;
        }
        next -= &(&gain * &apc.transpose());
    }
    Ok(EstimatorState {
        xhat,
        k: st.k + 1,
        tvkf_cov: Some(next.symmetrize()),
    })
}

/// `Σ_i tr Y_i`.
pub fn theoretical_cost(sol: &CareSolution) -> f64 {
    sol.y.iter().map(Matrix::trace).sum()
}

/// Stationary error covariance of a fixed-gain estimator: the total `Σ_i Σ_i(∞)`
/// and the per-mode parts.
pub fn los_theoretical_cov(model: &JumpModel, est: &Estimator) -> Result<(Matrix, Vec<Matrix>)> {
    if est.kind == EstimatorKind::Tvkf {
        return Err(Error::InvalidModel("TVKF has no stationary gain table".into()));
    }
    let per_mode = coupled_lyapunov(model, &est.gain_table)?;
    Ok((sum(&per_mode), per_mode))
}
