//! Filtering coupled Riccati equations and coupled Lyapunov equations.
//!
//! The coupled algebraic Riccati equations
//!
//! ```text
//! Y_j = Σ_i p_ij [A Y_i A' − A Y_i H_i'(H_i Y_i H_i' + μ_i R)⁻¹ H_i Y_i A' + μ_i Q]
//! ```
//!
//! are solved by running the difference recursion to its fixed point. The
//! optimal gains are `K_j = A Y_j H_j'(H_j Y_j H_j' + μ_j R)⁻¹`.

use serde::{Deserialize, Serialize};

use crate::channels::{stationary_dist, ChannelParams};
use crate::error::{Error, Result};
use crate::matrix::{inverse, kron, psd_check, solve_refined, solve_spd, spectral_radius, unvec, vec, Matrix};
use crate::mjls::{apply_tilde_l, closed_loop_operator_matrix, closed_loop_radius, GainTable, JumpModel};

/// Starting point of the difference recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdreInit {
    #[default]
    Zero,
    /// `Y_j(0) = μ_j Π_0` with `Π_0` the initial state covariance.
    StationaryPrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdreConfig {
    /// Converged once the sup-norm step is at most `tol · max(1, max|Y|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates with an entry above this magnitude count as divergent.
    pub divergence_threshold: f64,
    pub init: CdreInit,
}

impl Default for CdreConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 100_000,
            divergence_threshold: 1e12,
            init: CdreInit::Zero,
        }
    }
}

impl CdreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.divergence_threshold > 0.0) {
            return Err(Error::InvalidModel(
                "solver needs tol > 0, max_iter ≥ 1 and a positive divergence threshold".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CareSolution {
    pub y: Vec<Matrix>,
    pub gains: GainTable,
    /// `Σ_i tr Y_i`.
    pub cost: f64,
    /// Spectral radius of the closed-loop operator under `gains`.
    pub rho_closed: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl CareSolution {
    /// `Σ_i Y_i`, the stationary error covariance.
    pub fn total(&self) -> Matrix {
        sum(&self.y)
    }
}

pub(crate) fn sum(v: &[Matrix]) -> Matrix {
    let mut out = Matrix::zeros(v[0].rows(), v[0].cols());
    for m in v {
        out += m;
    }
    out
}

fn sup_step(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).max_abs()).fold(0.0, f64::max)
}

fn sup_norm(a: &[Matrix]) -> f64 {
    a.iter().map(Matrix::max_abs).fold(0.0, f64::max)
}

/// Outcome of running a monotone recursion to a fixed point.
struct FixedPoint {
    value: Vec<Matrix>,
    iterations: usize,
}

fn run_to_fixed_point<F>(init: Vec<Matrix>, cfg: &CdreConfig, mut step: F) -> Result<FixedPoint>
where
    F: FnMut(&[Matrix]) -> Result<Vec<Matrix>>,
{
    cfg.validate()?;
    let mut cur = init;
    let mut midway_step = f64::INFINITY;
    let mut last_step = f64::INFINITY;
    for k in 1..=cfg.max_iter {
        let next = step(&cur)?;
        let norm = sup_norm(&next);
        if !norm.is_finite() || norm > cfg.divergence_threshold {
            return Err(Error::Diverged { iterations: k, norm });
        }
        last_step = sup_step(&next, &cur);
        cur = next;
        if last_step <= cfg.tol * norm.max(1.0) {
            return Ok(FixedPoint { value: cur, iterations: k });
        }
        if k == cfg.max_iter / 2 {
            midway_step = last_step;
        }
    }
    if last_step >= midway_step {
        Err(Error::Diverged {
            iterations: cfg.max_iter,
            norm: sup_norm(&cur),
        })
    } else {
        Err(Error::NotConverged {
            iterations: cfg.max_iter,
            step: last_step,
        })
    }
}

/// Innovation pieces for mode `i`: `(A Y_i H_i', H_i Y_i H_i' + μ_i R)`.
fn innovation(model: &JumpModel, y: &Matrix, i: usize) -> (Matrix, Matrix) {
    let a = &model.plant.a;
    let h = &model.h[i];
    let yh = y * &h.transpose();
    let g = a * &yh;
    let s = &(h * &yh) + &model.plant.r().scale(model.mu()[i]);
    (g, s)
}

fn check_tuple(model: &JumpModel, y: &[Matrix]) -> Result<()> {
    let n = model.state_dim();
    if y.len() != model.mode_count() || y.iter().any(|m| m.shape() != (n, n)) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} matrices of size {n}x{n}",
            model.mode_count()
        )));
    }
    Ok(())
}

/// Right-hand side of the coupled Riccati equations evaluated at `y`.
pub fn care_rhs(model: &JumpModel, y: &[Matrix]) -> Result<Vec<Matrix>> {
    check_tuple(model, y)?;
    let a = &model.plant.a;
    let q = &model.plant.q;
    let mut per_mode = Vec::with_capacity(y.len());
    for (i, yi) in y.iter().enumerate() {
        let (g, s) = innovation(model, yi, i);
        let correction = &g * &solve_spd(&s, &g.transpose())?;
        per_mode.push(&(&a.congruence(yi) - &correction) + &q.scale(model.mu()[i]));
    }
    let n = model.state_dim();
    Ok((0..y.len())
        .map(|j| {
            let mut out = Matrix::zeros(n, n);
            for (i, m) in per_mode.iter().enumerate() {
                let p = model.chain.p(i, j);
                if p != 0.0 {
                    out += &m.scale(p);
                }
            }
            out.symmetrize()
        })
        .collect())
}

/// `max_j ‖RHS_j(Y) − Y_j‖_∞`.
pub fn care_residual(model: &JumpModel, y: &[Matrix]) -> Result<f64> {
    Ok(sup_step(&care_rhs(model, y)?, y))
}

/// `K_j = A Y_j H_j'(H_j Y_j H_j' + μ_j R)⁻¹`.
pub fn optimal_gains(model: &JumpModel, y: &[Matrix]) -> Result<GainTable> {
    check_tuple(model, y)?;
    let mut gains = Vec::with_capacity(y.len());
    for (j, yj) in y.iter().enumerate() {
        let (g, s) = innovation(model, yj, j);
        // K = G S⁻¹  ⇔  S K' = G'
        gains.push(solve_spd(&s, &g.transpose())?.transpose());
    }
    Ok(GainTable { gains })
}

fn initial_tuple(model: &JumpModel, init: CdreInit) -> Vec<Matrix> {
    let n = model.state_dim();
    match init {
        CdreInit::Zero => vec![Matrix::zeros(n, n); model.mode_count()],
        CdreInit::StationaryPrior => model.mu().iter().map(|&m| model.plant.x0_cov.scale(m)).collect(),
    }
}

/// Iterates the coupled difference Riccati recursion to its fixed point.
pub fn cdre_iterate(model: &JumpModel, cfg: &CdreConfig) -> Result<CareSolution> {
    let fp = run_to_fixed_point(initial_tuple(model, cfg.init), cfg, |y| care_rhs(model, y))?;
    let y = fp.value;
    let gains = optimal_gains(model, &y)?;
    Ok(CareSolution {
        cost: y.iter().map(Matrix::trace).sum(),
        rho_closed: closed_loop_radius(model, &gains)?,
        residual: care_residual(model, &y)?,
        iterations: fp.iterations,
        gains,
        y,
    })
}

/// Largest `Y` residual tolerated by [`verify_stabilizing`].
pub const STABILIZING_RESIDUAL: f64 = 1e-6;

/// `y` is PSD, solves the CAREs and its gains stabilize the error in mean square.
pub fn verify_stabilizing(model: &JumpModel, y: &[Matrix]) -> bool {
    let check = || -> Result<bool> {
        if !y.iter().all(|m| psd_check(m, 1e-9)) {
            return Ok(false);
        }
        if care_residual(model, y)? > STABILIZING_RESIDUAL {
            return Ok(false);
        }
        Ok(closed_loop_radius(model, &optimal_gains(model, y)?)? < 1.0)
    };
    check().unwrap_or(false)
}

/// Constant terms `Σ_i p_ij μ_i (K_i D_i R D_i' K_i' + Q)` of the coupled Lyapunov equations.
fn lyapunov_forcing(model: &JumpModel, gains: &GainTable) -> Vec<Matrix> {
    let r = model.plant.r();
    let per_mode: Vec<Matrix> = (0..model.mode_count())
        .map(|i| {
            let kd = &gains.gains[i] * &model.d[i];
            (&kd.congruence(&r) + &model.plant.q).scale(model.mu()[i])
        })
        .collect();
    let n = model.state_dim();
    (0..model.mode_count())
        .map(|j| {
            let mut out = Matrix::zeros(n, n);
            for (i, m) in per_mode.iter().enumerate() {
                out += &m.scale(model.chain.p(i, j));
            }
            out
        })
        .collect()
}

/// Stationary per-mode error second moments `Σ_i(∞)` under fixed gains:
/// the solution of
/// `Σ_j = Σ_i p_ij [(A − K_i H_i) Σ_i (·)' + μ_i (K_i D_i R D_i' K_i' + Q)]`.
pub fn coupled_lyapunov(model: &JumpModel, gains: &GainTable) -> Result<Vec<Matrix>> {
    let op = closed_loop_operator_matrix(model, gains)?;
    let rho = spectral_radius(&op)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let n = model.state_dim();
    let n2 = n * n;
    let modes = model.mode_count();
    let forcing = lyapunov_forcing(model, gains);
    let mut c = Matrix::zeros(modes * n2, 1);
    for (j, f) in forcing.iter().enumerate() {
        c.set_block(j * n2, 0, &vec(f));
    }
    let lhs = &Matrix::identity(modes * n2) - &op;
    let s = solve_refined(&lhs, &c, 2)?;
    Ok((0..modes)
        .map(|j| unvec(&s.as_slice()[j * n2..(j + 1) * n2], n, n).symmetrize())
        .collect())
}

/// Same fixed point as [`coupled_lyapunov`], reached by iterating the recursion from zero.
pub fn coupled_lyapunov_iterative(model: &JumpModel, gains: &GainTable, cfg: &CdreConfig) -> Result<Vec<Matrix>> {
    let forcing = lyapunov_forcing(model, gains);
    let n = model.state_dim();
    let fp = run_to_fixed_point(vec![Matrix::zeros(n, n); model.mode_count()], cfg, |s| {
        Ok(apply_tilde_l(model, gains, s)
            .iter()
            .zip(&forcing)
            .map(|(a, b)| (a + b).symmetrize())
            .collect())
    })?;
    Ok(fp.value)
}

/// Solution of the two-mode Riccati equations of one decoupled block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCareSolution {
    /// Mode "dropped".
    pub z1: Matrix,
    /// Mode "received".
    pub z2: Matrix,
    /// Single block gain `ℓ = A Z_2 c'(c Z_2 c' + π_2 r)⁻¹`, used in both modes.
    pub gain: Matrix,
    /// Spectral radius of the block's closed-loop operator under `gain`.
    pub rho_closed: f64,
    pub iterations: usize,
}

/// Solves the two-mode coupled Riccati equations of a single-output block in
/// information form:
///
/// `Z_r = Σ_j p_jr {A Z_j [I + h_j'(π_j r)⁻¹ h_j Z_j]⁻¹ A' + π_j Q}`,
/// with `h_1 = 0`, `h_2 = c`.
pub fn sub_care_solve(
    a: &Matrix,
    c: &Matrix,
    ch: &ChannelParams,
    q: &Matrix,
    r: f64,
    cfg: &CdreConfig,
) -> Result<SubCareSolution> {
    let n = a.rows();
    if !a.is_square() || c.shape() != (1, n) || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "block needs A {n}x{n}, c 1x{n}, Q {n}x{n}; got c {}x{} and Q {}x{}",
            c.rows(),
            c.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidModel("block measurement noise must be positive".into()));
    }
    ch.validate()?;
    let tpm = ch.tpm();
    let (pi1, pi2) = stationary_dist(ch);
    let pi = [pi1, pi2];
    let info = c.transpose().congruence(&Matrix::identity(1)).scale(1.0 / (pi2 * r));
    let eye = Matrix::identity(n);
    let start = match cfg.init {
        CdreInit::Zero => vec![Matrix::zeros(n, n); 2],
        CdreInit::StationaryPrior => pi.iter().map(|&p| eye.scale(p)).collect(),
    };
    let fp = run_to_fixed_point(start, cfg, |z| {
        let mode1 = &a.congruence(&z[0]) + &q.scale(pi[0]);
        let bracket = &eye + &(&info * &z[1]);
        let mode2 = &(&(a * &z[1]) * &inverse(&bracket)?) * &a.transpose();
        let mode2 = &mode2 + &q.scale(pi[1]);
        Ok((0..2)
            .map(|r| (&mode1.scale(tpm[(0, r)]) + &mode2.scale(tpm[(1, r)])).symmetrize())
            .collect())
    })?;
    let z2 = fp.value[1].clone();
    let zc = &z2 * &c.transpose();
    let s = (c * &zc)[(0, 0)] + pi2 * r;
    let gain = (a * &zc).scale(1.0 / s);
    let rho_closed = sub_closed_loop_radius(a, c, ch, &gain)?;
    Ok(SubCareSolution {
        z1: fp.value[0].clone(),
        z2,
        gain,
        rho_closed,
        iterations: fp.iterations,
    })
}

/// Spectral radius of the two-mode operator with closed loops `A` (dropped)
/// and `A − ℓ c` (received).
pub fn sub_closed_loop_radius(a: &Matrix, c: &Matrix, ch: &ChannelParams, gain: &Matrix) -> Result<f64> {
    let n2 = a.rows() * a.rows();
    let tpm = ch.tpm();
    let loops = [a.clone(), a - &(gain * c)];
    let mut op = Matrix::zeros(2 * n2, 2 * n2);
    for (i, f) in loops.iter().enumerate() {
        let ff = kron(f, f);
        for j in 0..2 {
            op.set_block(j * n2, i * n2, &ff.scale(tpm[(i, j)]));
        }
    }
    spectral_radius(&op)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::channels::ChannelParams;
    use crate::matrix::frobenius_inner;
    use crate::mjls::{assemble, PlantModel};
    use crate::testutil::{random_jump_model, random_matrix, random_psd, rng};

    fn scalar_model(a: f64, p: f64, q: f64, qn: f64, r: f64) -> JumpModel {
        let plant = PlantModel::new(Matrix::diag(&[a]), Matrix::identity(1), Matrix::diag(&[qn]), vec![r]).unwrap();
        assemble(&plant, &[ChannelParams::new(p, q).unwrap()]).unwrap()
    }

    fn three_sensor() -> JumpModel {
        let plant = PlantModel::new(
            Matrix::from_rows(&[[1.0, 0.0, 0.0], [1.0, 1.2, 0.0], [1.0, 1.5, 1.3]]),
            Matrix::identity(3),
            Matrix::diag(&[1.0, 1.0, 0.0]),
            vec![1.0; 3],
        )
        .unwrap();
        let chs = [(0.5, 0.2), (0.6, 0.32), (0.7, 0.51)].map(|(p, q)| ChannelParams::new(p, q).unwrap());
        assemble(&plant, &chs).unwrap()
    }

    /// Random plant that is detectable for sure: A scaled to be stable.
    fn stable_model(r: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize) -> JumpModel {
        let mut model = random_jump_model(r, n, m);
        let rho = spectral_radius(&model.plant.a).unwrap();
        let target = r.random_range(0.3..1.4);
        model.plant.a = model.plant.a.scale(target / rho.max(1e-3));
        model
    }

    #[test]
    fn zero_dynamics_give_scaled_noise() {
        let mut model = three_sensor();
        model.plant.a = Matrix::zeros(3, 3);
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        for (j, yj) in sol.y.iter().enumerate() {
            assert!((yj - &model.plant.q.scale(model.mu()[j])).max_abs() < 1e-14);
            assert_eq!(sol.gains.gains[j].max_abs(), 0.0);
        }
        let exact: Vec<Matrix> = model.mu().iter().map(|&m| model.plant.q.scale(m)).collect();
        assert!(care_residual(&model, &exact).unwrap() < 1e-15);
        assert!((sol.cost - model.plant.q.trace()).abs() < 1e-12);
    }

    #[test]
    fn three_sensor_plant_converges_with_small_residual() {
        let model = three_sensor();
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        assert!(sol.residual <= 1e-8, "residual {}", sol.residual);
        assert!(sol.rho_closed < 1.0);
        assert!(verify_stabilizing(&model, &sol.y));
    }

    #[test]
    fn residual_grows_with_perturbation() {
        let model = three_sensor();
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        let mut last = care_residual(&model, &sol.y).unwrap();
        for eps in [1e-6, 1e-4, 1e-2, 1.0] {
            let y: Vec<Matrix> = sol.y.iter().map(|m| m + &Matrix::identity(3).scale(eps)).collect();
            let res = care_residual(&model, &y).unwrap();
            assert!(res > last);
            last = res;
        }
    }

    #[test]
    fn zero_tuple_is_not_stabilizing() {
        let model = three_sensor();
        assert!(!verify_stabilizing(&model, &vec![Matrix::zeros(3, 3); 8]));
    }

    #[test]
    fn scalar_iid_case_matches_direct_recursion() {
        // p = 1 − q: arrivals are i.i.d. with probability q
        let (a, p, q, qn, r) = (1.1, 0.4, 0.6, 0.7, 0.3);
        let model = scalar_model(a, p, q, qn, r);
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        let mu = [p / (p + q), q / (p + q)];
        let tpm = [[1.0 - q, q], [p, 1.0 - p]];
        let (mut y1, mut y2) = (0.0f64, 0.0f64);
        for _ in 0..100_000 {
            let m1 = a * a * y1 + mu[0] * qn;
            let m2 = a * a * y2 - (a * y2).powi(2) / (y2 + mu[1] * r) + mu[1] * qn;
            let n1 = tpm[0][0] * m1 + tpm[1][0] * m2;
            let n2 = tpm[0][1] * m1 + tpm[1][1] * m2;
            let done = (n1 - y1).abs().max((n2 - y2).abs()) < 1e-15;
            y1 = n1;
            y2 = n2;
            if done {
                break;
            }
        }
        assert!((sol.y[0][(0, 0)] - y1).abs() < 1e-9 * y1);
        assert!((sol.y[1][(0, 0)] - y2).abs() < 1e-9 * y2);
    }

    #[test]
    fn undetectable_scalar_diverges() {
        let model = scalar_model(1.3, 0.5, 0.35, 1.0, 1.0);
        assert!(matches!(cdre_iterate(&model, &CdreConfig::default()), Err(Error::Diverged { .. })));
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let model = three_sensor();
        let cfg = CdreConfig {
            max_iter: 50,
            ..CdreConfig::default()
        };
        assert!(matches!(cdre_iterate(&model, &cfg), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn lyapunov_at_optimal_gains_reproduces_y() {
        let model = three_sensor();
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        let sigma = coupled_lyapunov(&model, &sol.gains).unwrap();
        for (s, y) in sigma.iter().zip(&sol.y) {
            assert!((s - y).max_abs() <= 1e-7 * y.max_abs());
        }
    }

    #[test]
    fn lyapunov_zero_dynamics() {
        let mut model = three_sensor();
        model.plant.a = Matrix::zeros(3, 3);
        let sigma = coupled_lyapunov(&model, &GainTable::zeros(8, 3, 3)).unwrap();
        for (j, s) in sigma.iter().enumerate() {
            assert!((s - &model.plant.q.scale(model.mu()[j])).max_abs() < 1e-14);
        }
    }

    #[test]
    fn lyapunov_rejects_unstable_gains() {
        let model = scalar_model(2.0, 0.5, 0.5, 1.0, 1.0);
        assert!(matches!(
            coupled_lyapunov(&model, &GainTable::zeros(2, 1, 1)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn lyapunov_direct_and_iterative_agree() {
        let mut r = rng(31);
        let mut checked = 0;
        while checked < 20 {
            let model = stable_model(&mut r, 3, 2);
            let gains = GainTable {
                gains: (0..model.mode_count()).map(|_| random_matrix(&mut r, 3, 2).scale(0.2)).collect(),
            };
            let Ok(direct) = coupled_lyapunov(&model, &gains) else { continue };
            if closed_loop_radius(&model, &gains).unwrap() > 0.97 {
                continue;
            }
            let iter = coupled_lyapunov_iterative(&model, &gains, &CdreConfig::default()).unwrap();
            for (d, i) in direct.iter().zip(&iter) {
                assert!((d - i).max_abs() <= 1e-8 * d.max_abs().max(1.0));
                assert!(psd_check(d, 1e-9));
            }
            checked += 1;
        }
    }

    #[test]
    fn gains_are_first_order_optimal() {
        let mut r = rng(32);
        let model = three_sensor();
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        for _ in 0..20 {
            let j = r.random_range(0..model.mode_count());
            let mut gains = sol.gains.clone();
            gains.gains[j] = &gains.gains[j] + &random_matrix(&mut r, 3, 3).scale(1e-2);
            if let Ok(sigma) = coupled_lyapunov(&model, &gains) {
                let total: f64 = sigma.iter().map(Matrix::trace).sum();
                assert!(total >= sol.cost * (1.0 - 1e-10), "{total} < {}", sol.cost);
            }
        }
    }

    #[test]
    fn one_more_step_leaves_solution_fixed() {
        let model = three_sensor();
        let sol = cdre_iterate(&model, &CdreConfig::default()).unwrap();
        let next = care_rhs(&model, &sol.y).unwrap();
        for (a, b) in next.iter().zip(&sol.y) {
            assert!((a - b).max_abs() <= 1e-8);
        }
    }

    #[test]
    fn iterates_increase_from_zero() {
        let mut r = rng(33);
        for _ in 0..10 {
            let model = stable_model(&mut r, 2, 2);
            let mut y = vec![Matrix::zeros(2, 2); model.mode_count()];
            for _ in 0..30 {
                let next = care_rhs(&model, &y).unwrap();
                for (a, b) in next.iter().zip(&y) {
                    assert!(psd_check(&(a - b), 1e-9));
                }
                y = next;
            }
        }
    }

    #[test]
    fn both_initializations_reach_the_same_solution() {
        let mut r = rng(34);
        let mut compared = 0;
        for _ in 0..20 {
            let model = stable_model(&mut r, 2, 2);
            let a = cdre_iterate(&model, &CdreConfig::default());
            let b = cdre_iterate(
                &model,
                &CdreConfig {
                    init: CdreInit::StationaryPrior,
                    ..CdreConfig::default()
                },
            );
            if let (Ok(a), Ok(b)) = (a, b) {
                for (x, y) in a.y.iter().zip(&b.y) {
                    assert!((x - y).max_abs() <= 1e-7 * x.max_abs().max(1.0));
                }
                compared += 1;
            }
        }
        assert!(compared >= 10);
    }

    #[test]
    fn sub_care_zero_dynamics() {
        let ch = ChannelParams::new(0.3, 0.6).unwrap();
        let q = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]);
        let c = Matrix::row_vector(&[1.0, 0.0]);
        let sol = sub_care_solve(&Matrix::zeros(2, 2), &c, &ch, &q, 1.0, &CdreConfig::default()).unwrap();
        let (pi1, pi2) = stationary_dist(&ch);
        assert!((&sol.z1 - &q.scale(pi1)).max_abs() < 1e-14);
        assert!((&sol.z2 - &q.scale(pi2)).max_abs() < 1e-14);
        assert_eq!(sol.gain.max_abs(), 0.0);
    }

    #[test]
    fn sub_care_threshold_for_a_1_2() {
        let a = Matrix::diag(&[1.2]);
        let c = Matrix::identity(1);
        let q = Matrix::identity(1);
        let above = ChannelParams::new(0.6, 0.32).unwrap();
        let below = ChannelParams::new(0.6, 0.29).unwrap();
        let cfg = CdreConfig::default();
        let sol = sub_care_solve(&a, &c, &above, &q, 1.0, &cfg).unwrap();
        assert!(sol.rho_closed < 1.0);
        assert!(matches!(sub_care_solve(&a, &c, &below, &q, 1.0, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn sub_care_matches_scalar_recursion() {
        let (a, qn, r, p, q) = (0.9f64, 0.5, 0.2, 0.35, 0.45);
        let ch = ChannelParams::new(p, q).unwrap();
        let sol = sub_care_solve(
            &Matrix::diag(&[a]),
            &Matrix::identity(1),
            &ch,
            &Matrix::diag(&[qn]),
            r,
            &CdreConfig::default(),
        )
        .unwrap();
        let pi = [p / (p + q), q / (p + q)];
        let tpm = [[1.0 - q, q], [p, 1.0 - p]];
        let (mut z1, mut z2) = (0.0f64, 0.0f64);
        for _ in 0..10_000 {
            let m1 = a * a * z1 + pi[0] * qn;
            let m2 = a * a * z2 * (pi[1] * r) / (pi[1] * r + z2) + pi[1] * qn;
            z1 = tpm[0][0] * m1 + tpm[1][0] * m2;
            z2 = tpm[0][1] * m1 + tpm[1][1] * m2;
        }
        assert!((sol.z1[(0, 0)] - z1).abs() < 1e-10);
        assert!((sol.z2[(0, 0)] - z2).abs() < 1e-10);
        let ell = a * z2 / (z2 + pi[1] * r);
        assert!((sol.gain[(0, 0)] - ell).abs() < 1e-10);
    }

    #[test]
    fn trace_of_psd_product_is_nonnegative() {
        let mut r = rng(35);
        for _ in 0..200 {
            let a = random_psd(&mut r, 4, 2);
            let b = random_psd(&mut r, 4, 2);
            assert!(frobenius_inner(&a, &b) >= -1e-12);
        }
        // orthogonal ranges: tr(AB) = 0 and AB = 0
        let a = Matrix::diag(&[1.0, 0.0]);
        let b = Matrix::diag(&[0.0, 3.0]);
        assert_eq!(frobenius_inner(&a, &b), 0.0);
        assert_eq!((&a * &b).max_abs(), 0.0);
    }

    proptest! {
        #[test]
        fn zero_trace_product_means_zero_product(seed in 0u64..500) {
            let mut r = rng(seed);
            // A = U Uᵀ, B = W Wᵀ with W ⟂ U
            let u = random_matrix(&mut r, 3, 1);
            let w0 = random_matrix(&mut r, 3, 1);
            let proj = (&u.transpose() * &w0)[(0, 0)] / (&u.transpose() * &u)[(0, 0)];
            let w = &w0 - &u.scale(proj);
            let a = &u * &u.transpose();
            let b = &w * &w.transpose();
            prop_assert!(frobenius_inner(&a, &b).abs() < 1e-12);
            prop_assert!((&a * &b).max_abs() < 1e-12);
        }

        #[test]
        fn vanishing_gram_means_vanishing_factor(seed in 0u64..500) {
            let mut r = rng(seed);
            let g = random_matrix(&mut r, 3, 2);
            let gram = &g * &g.transpose();
            // ‖G‖_F² = tr(G G'), so G G' = 0 forces G = 0
            prop_assert!((gram.trace() - g.frobenius_norm().powi(2)).abs() < 1e-12);
            prop_assert!(gram.max_abs() > 0.0 || g.max_abs() == 0.0);
        }
    }
}
