//! Mean-square detectability of the jump model.
//!
//! Three routes, from cheapest to most general:
//!
//! * analytic per-block thresholds on a Wonham form ([`decoupled_detectability`]),
//! * a necessary condition on the spectral radius of `A` ([`necessary_condition`]),
//! * the Riccati decision: with `Q = I`, `R = I` the coupled Riccati equations
//!   have a stabilizing solution exactly when the model is detectable
//!   ([`ms_detectable_decision`]).

mod wonham;

use serde::{Deserialize, Serialize};

pub use wonham::{pair_detectable, unobservable_subspace, verify_wonham_form, wonham_decompose, WonhamForm, WONHAM_TOL};

use crate::channels::ChannelParams;
use crate::error::{Error, Result};
use crate::matrix::{eigenvalues, rank, solve_linear, spectral_radius, Matrix};
use crate::mjls::{GainTable, JumpModel};
use crate::riccati::{cdre_iterate, sub_care_solve, CdreConfig};

/// Eigenvalues within this distance of the unit circle count as on it.
pub const UNIT_CIRCLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Detectable,
    Undetectable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Per-block tests on a Wonham form.
    Decoupled,
    /// Riccati recursion with unit noise.
    Riccati,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockTest {
    /// Exact threshold for a scalar block.
    ScalarThreshold,
    /// Sufficient eigenvalue threshold.
    Sufficient,
    /// Two-mode Riccati solve for the block.
    SubRiccati,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVerdict {
    pub block: usize,
    pub size: usize,
    pub test: BlockTest,
    /// Critical rate `λ_c` of the block.
    pub lambda_c: f64,
    pub passed: bool,
    /// Closed-loop radius of the block when the sub-Riccati solve ran and converged.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdreStatus {
    Converged,
    Diverged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdreOutcome {
    pub status: CdreStatus,
    pub iterations: usize,
    pub rho_closed: Option<f64>,
    /// Largest iterate entry at divergence, or last step size when the cap was hit.
    pub last_norm: Option<f64>,
    /// Stabilizing gains when the recursion converged with `rho_closed < 1`.
    pub gains: Option<GainTable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NecessaryCheck {
    /// `Π (1 − q_i) ρ(A)²`.
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub decision: Decision,
    pub method: Method,
    pub necessary: NecessaryCheck,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdre: Option<CdreOutcome>,
}

/// Rank of the complex matrix `re + i·im`, via its real embedding.
fn complex_rank(re: &Matrix, im: &Matrix, tol: f64) -> usize {
    if im.max_abs() == 0.0 {
        return rank(re, tol);
    }
    let top = re.hstack(&(-im));
    let bottom = im.hstack(re);
    rank(&top.vstack(&bottom), tol) / 2
}

/// Every eigenvalue of `A` on the unit circle is controllable from `Q`:
/// `rank [λI − A, Q] = n`.
pub fn unit_circle_controllability(a: &Matrix, q: &Matrix, tol: f64) -> Result<bool> {
    let n = a.rows();
    for lam in eigenvalues(a)? {
        if (lam.norm() - 1.0).abs() > tol.max(UNIT_CIRCLE_TOL) {
            continue;
        }
        let re = (&Matrix::identity(n).scale(lam.re) - a).hstack(q);
        let im = Matrix::identity(n).scale(lam.im).hstack(&Matrix::zeros(n, n));
        if complex_rank(&re, &im, tol) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `Π (1 − q_i) ρ(A)² < 1`, necessary for detectability.
pub fn necessary_condition(chs: &[ChannelParams], a: &Matrix) -> Result<NecessaryCheck> {
    let rho = spectral_radius(a)?;
    let value = chs.iter().map(|c| 1.0 - c.q).product::<f64>() * rho * rho;
    Ok(NecessaryCheck { value, holds: value < 1.0 })
}

/// `λ_c = 1 − 1 / Π max{|λ_i|², 1}`.
pub fn block_sufficient_threshold(a: &Matrix) -> Result<f64> {
    let prod: f64 = eigenvalues(a)?.iter().map(|z| z.norm_sqr().max(1.0)).product();
    Ok(1.0 - 1.0 / prod)
}

/// `min{q, 1 − p} > λ_c`.
pub fn block_sufficient(ch: &ChannelParams, a: &Matrix) -> Result<bool> {
    Ok(ch.q.min(1.0 - ch.p) > block_sufficient_threshold(a)?)
}

/// Exact test for a scalar block: `q > 1 − 1/a²`, i.e. `(1 − q) a² < 1`.
pub fn block_scalar_iff(ch: &ChannelParams, a: f64) -> bool {
    (1.0 - ch.q) * a * a < 1.0
}

/// Per-block verdicts on a Wonham form; channel `i` drives block `i`.
///
/// All blocks passing certifies detectability of the whole model. A failing
/// block only makes the verdict inconclusive.
pub fn decoupled_detectability(wf: &WonhamForm, chs: &[ChannelParams], cfg: &CdreConfig) -> Result<DetectReport> {
    if chs.len() != wf.block_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels for {} blocks",
            chs.len(),
            wf.block_count()
        )));
    }
    let mut blocks = Vec::with_capacity(chs.len());
    for (i, ch) in chs.iter().enumerate() {
        let a = wf.a_block(i);
        let size = a.rows();
        let lambda_c = block_sufficient_threshold(&a)?;
        let verdict = if size == 1 {
            BlockVerdict {
                block: i + 1,
                size,
                test: BlockTest::ScalarThreshold,
                lambda_c,
                passed: block_scalar_iff(ch, a[(0, 0)]),
                rho: None,
            }
        } else if block_sufficient(ch, &a)? {
            BlockVerdict {
                block: i + 1,
                size,
                test: BlockTest::Sufficient,
                lambda_c,
                passed: true,
                rho: None,
            }
        } else {
            let sub = sub_care_solve(&a, &wf.c_row(i), ch, &Matrix::identity(size), 1.0, cfg);
            let rho = sub.as_ref().ok().map(|s| s.rho_closed);
            BlockVerdict {
                block: i + 1,
                size,
                test: BlockTest::SubRiccati,
                lambda_c,
                passed: rho.is_some_and(|r| r < 1.0),
                rho,
            }
        };
        blocks.push(verdict);
    }
    let decision = if blocks.iter().all(|b| b.passed) {
        Decision::Detectable
    } else {
        Decision::Inconclusive
    };
    Ok(DetectReport {
        decision,
        method: Method::Decoupled,
        necessary: necessary_condition(chs, &wf.a_transformed)?,
        blocks,
        cdre: None,
    })
}

/// Riccati-based decision on the joint model.
///
/// The plant noise is replaced by `Q = I`, `R = I`; the recursion then
/// converges to a stabilizing solution exactly when the model is detectable.
/// Blow-up past the divergence threshold reads as undetectable; hitting the
/// iteration cap or converging to a non-stabilizing point is inconclusive.
pub fn ms_detectable_decision(model: &JumpModel, cfg: &CdreConfig) -> Result<DetectReport> {
    let n = model.state_dim();
    let unit = model.with_noise(Matrix::identity(n), vec![1.0; model.output_dim()])?;
    let necessary = necessary_condition(&model.chain.channels, &model.plant.a)?;
    let (decision, cdre) = match cdre_iterate(&unit, cfg) {
        Ok(sol) => {
            let stable = sol.rho_closed < 1.0;
            (
                if stable { Decision::Detectable } else { Decision::Inconclusive },
                CdreOutcome {
                    status: CdreStatus::Converged,
                    iterations: sol.iterations,
                    rho_closed: Some(sol.rho_closed),
                    last_norm: None,
                    gains: stable.then_some(sol.gains),
                },
            )
        }
        Err(Error::Diverged { iterations, norm }) => (
            Decision::Undetectable,
            CdreOutcome {
                status: CdreStatus::Diverged,
                iterations,
                rho_closed: None,
                last_norm: Some(norm),
                gains: None,
            },
        ),
        Err(Error::NotConverged { iterations, step }) => (
            Decision::Inconclusive,
            CdreOutcome {
                status: CdreStatus::NotConverged,
                iterations,
                rho_closed: None,
                last_norm: Some(step),
                gains: None,
            },
        ),
        Err(e) => return Err(e),
    };
    Ok(DetectReport {
        decision,
        method: Method::Riccati,
        necessary,
        blocks: Vec::new(),
        cdre: Some(cdre),
    })
}

/// `L_X = A X C'(C X C')⁻¹`.
fn innovation_gain(a: &Matrix, c: &Matrix, x: &Matrix) -> Result<Matrix> {
    let xc = x * &c.transpose();
    let s = c * &xc;
    let g = a * &xc;
    match solve_linear(&s.transpose(), &g.transpose()) {
        Ok(k) => Ok(k.transpose()),
        Err(Error::SingularMatrix { .. }) => Err(Error::SingularInnovation),
        Err(e) => Err(e),
    }
}

/// The operators `g_1, g_2` of a single-channel block:
///
/// ```text
/// g_1 = (1 − q) A X_1 A' + p A X_2 A' − p A X_2 C'(C X_2 C')⁻¹ C X_2 A'
/// g_2 = q A X_1 A' + (1 − p) A X_2 A' − (1 − p) A X_2 C'(C X_2 C')⁻¹ C X_2 A'
/// ```
pub fn g_operators(ch: &ChannelParams, a: &Matrix, c: &Matrix, x1: &Matrix, x2: &Matrix) -> Result<(Matrix, Matrix)> {
    let lx = innovation_gain(a, c, x2)?;
    let ax1 = a.congruence(x1);
    let ax2 = a.congruence(x2);
    let corr = &lx * &(c * &(x2 * &a.transpose()));
    let reduced = &ax2 - &corr;
    let g1 = &ax1.scale(1.0 - ch.q) + &reduced.scale(ch.p);
    let g2 = &ax1.scale(ch.q) + &reduced.scale(1.0 - ch.p);
    Ok((g1.symmetrize(), g2.symmetrize()))
}

/// The operators `ψ_1, ψ_2` with closed loop `A_L = A + L C`:
///
/// ```text
/// ψ_1 = (1 − q) A X_1 A' + p A_L X_2 A_L'
/// ψ_2 = q A X_1 A' + (1 − p) A_L X_2 A_L'
/// ```
pub fn psi_operators(ch: &ChannelParams, a: &Matrix, c: &Matrix, l: &Matrix, x1: &Matrix, x2: &Matrix) -> (Matrix, Matrix) {
    let al = a + &(l * c);
    let ax1 = a.congruence(x1);
    let alx2 = al.congruence(x2);
    (
        &ax1.scale(1.0 - ch.q) + &alx2.scale(ch.p),
        &ax1.scale(ch.q) + &alx2.scale(1.0 - ch.p),
    )
}

/// `−L_X`, the closed loop gain at which `ψ_i = g_i`.
pub fn minimizing_gain(a: &Matrix, c: &Matrix, x2: &Matrix) -> Result<Matrix> {
    Ok(-&innovation_gain(a, c, x2)?)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::matrix::psd_check;
    use crate::mjls::{assemble, PlantModel};
    use crate::testutil::{random_channel, random_matrix, random_psd, rng};

    fn ch(p: f64, q: f64) -> ChannelParams {
        ChannelParams::new(p, q).unwrap()
    }

    fn three_sensor_a() -> Matrix {
        Matrix::from_rows(&[[1.0, 0.0, 0.0], [1.0, 1.2, 0.0], [1.0, 1.5, 1.3]])
    }

    fn three_sensor_channels() -> Vec<ChannelParams> {
        vec![ch(0.5, 0.2), ch(0.6, 0.32), ch(0.7, 0.51)]
    }

    fn scalar_model(a: f64, q: f64) -> JumpModel {
        let plant = PlantModel::new(Matrix::diag(&[a]), Matrix::identity(1), Matrix::identity(1), vec![1.0]).unwrap();
        assemble(&plant, &[ch(0.5, q)]).unwrap()
    }

    #[test]
    fn unit_circle_examples() {
        assert!(unit_circle_controllability(&three_sensor_a(), &Matrix::diag(&[1.0, 1.0, 0.0]), 1e-8).unwrap());
        assert!(!unit_circle_controllability(&Matrix::identity(2), &Matrix::zeros(2, 2), 1e-8).unwrap());
        let a = Matrix::diag(&[1.0, 0.5]);
        assert!(!unit_circle_controllability(&a, &Matrix::diag(&[0.0, 1.0]), 1e-8).unwrap());
        assert!(unit_circle_controllability(&a, &Matrix::identity(2), 1e-8).unwrap());
        // rotation: eigenvalues ±i on the circle
        let rot = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        assert!(!unit_circle_controllability(&rot, &Matrix::zeros(2, 2), 1e-8).unwrap());
        assert!(unit_circle_controllability(&rot, &Matrix::diag(&[1.0, 0.0]), 1e-8).unwrap());
    }

    #[test]
    fn necessary_condition_examples() {
        let nc = necessary_condition(&three_sensor_channels(), &three_sensor_a()).unwrap();
        assert!((nc.value - 0.8 * 0.68 * 0.49 * 1.69).abs() < 1e-12);
        assert!(nc.holds);
        let nc = necessary_condition(&[ch(0.5, 0.1)], &Matrix::diag(&[2.0])).unwrap();
        assert!((nc.value - 3.6).abs() < 1e-12 && !nc.holds);
        assert!(necessary_condition(&[ch(0.9, 0.01)], &Matrix::diag(&[0.99])).unwrap().holds);
    }

    #[test]
    fn thresholds() {
        assert_eq!(block_sufficient_threshold(&Matrix::diag(&[0.5, -0.3])).unwrap(), 0.0);
        assert!((block_sufficient_threshold(&Matrix::diag(&[1.2])).unwrap() - 0.3056).abs() < 5e-5);
        assert!((block_sufficient_threshold(&Matrix::diag(&[1.3])).unwrap() - 0.4083).abs() < 5e-5);
        assert!(block_sufficient(&ch(0.99, 0.01), &Matrix::diag(&[0.7])).unwrap());
        assert!(block_sufficient(&ch(0.6, 0.32), &Matrix::diag(&[1.2])).unwrap());
        assert!(!block_sufficient(&ch(0.1, 0.3), &Matrix::diag(&[1.3])).unwrap());
        assert!(block_scalar_iff(&ch(0.5, 0.01), 1.0));
        assert!(block_scalar_iff(&ch(0.5, 0.51), 1.3));
        assert!(!block_scalar_iff(&ch(0.5, 0.40), 1.3));
    }

    #[test]
    fn three_sensor_decoupled_is_detectable() {
        let wf = wonham_decompose(&three_sensor_a(), &Matrix::identity(3), WONHAM_TOL).unwrap();
        let report = decoupled_detectability(&wf, &three_sensor_channels(), &CdreConfig::default()).unwrap();
        assert_eq!(report.decision, Decision::Detectable);
        let lc: Vec<f64> = report.blocks.iter().map(|b| b.lambda_c).collect();
        assert!(lc[0].abs() < 1e-12 && (lc[1] - 0.3056).abs() < 5e-5 && (lc[2] - 0.4083).abs() < 5e-5);

        let mut chs = three_sensor_channels();
        chs[2].q = 0.40;
        let report = decoupled_detectability(&wf, &chs, &CdreConfig::default()).unwrap();
        assert!(!report.blocks[2].passed);
        assert_eq!(report.decision, Decision::Inconclusive);
    }

    #[test]
    fn stable_blocks_pass_trivially() {
        let a = Matrix::from_rows(&[[0.5, 0.0], [0.3, -0.4]]);
        let wf = wonham_decompose(&a, &Matrix::identity(2), WONHAM_TOL).unwrap();
        let report = decoupled_detectability(&wf, &[ch(0.9, 0.05), ch(0.9, 0.05)], &CdreConfig::default()).unwrap();
        assert_eq!(report.decision, Decision::Detectable);
    }

    #[test]
    fn larger_block_falls_back_to_sub_riccati() {
        // 2×2 block with eigenvalues 1.1, 1.1: λ_c ≈ 0.317
        let a = Matrix::from_rows(&[[1.1, 0.0], [1.0, 1.1]]);
        let c = Matrix::row_vector(&[0.0, 1.0]);
        let wf = wonham_decompose(&a, &c, WONHAM_TOL).unwrap();
        assert_eq!(wf.block_sizes, vec![2]);
        // q below λ_c but still detectable: the exact threshold for this block is lower
        let report = decoupled_detectability(&wf, &[ch(0.5, 0.25)], &CdreConfig::default()).unwrap();
        assert_eq!(report.blocks[0].test, BlockTest::SubRiccati);
        let full = assemble(&PlantModel::new(a, c, Matrix::identity(2), vec![1.0]).unwrap(), &[ch(0.5, 0.25)]).unwrap();
        let joint = ms_detectable_decision(&full, &CdreConfig::default()).unwrap();
        assert_eq!(report.blocks[0].passed, joint.decision == Decision::Detectable);
    }

    #[test]
    fn riccati_decision_examples() {
        let plant = PlantModel::new(three_sensor_a(), Matrix::identity(3), Matrix::diag(&[1.0, 1.0, 0.0]), vec![1.0; 3]).unwrap();
        let model = assemble(&plant, &three_sensor_channels()).unwrap();
        let report = ms_detectable_decision(&model, &CdreConfig::default()).unwrap();
        assert_eq!(report.decision, Decision::Detectable);
        let cdre = report.cdre.unwrap();
        assert!(cdre.rho_closed.unwrap() < 1.0 && cdre.gains.is_some());

        let report = ms_detectable_decision(&scalar_model(1.3, 0.35), &CdreConfig::default()).unwrap();
        assert_eq!(report.decision, Decision::Undetectable);

        let report = ms_detectable_decision(&scalar_model(0.6, 0.2), &CdreConfig::default()).unwrap();
        assert_eq!(report.decision, Decision::Detectable);
    }

    #[test]
    fn scalar_consistency_ladder() {
        let mut r = rng(51);
        let cfg = CdreConfig::default();
        for _ in 0..40 {
            let a: f64 = r.random_range(0.2..2.5);
            let c = random_channel(&mut r);
            // stay clear of the exact boundary where the recursion is slow
            if ((1.0 - c.q) * a * a - 1.0).abs() < 0.02 {
                continue;
            }
            let plant = PlantModel::new(Matrix::diag(&[a]), Matrix::identity(1), Matrix::identity(1), vec![1.0]).unwrap();
            let model = assemble(&plant, &[c]).unwrap();
            let d = ms_detectable_decision(&model, &cfg).unwrap();
            let iff = block_scalar_iff(&c, a);
            assert_eq!(d.decision == Decision::Detectable, iff, "a={a} q={}", c.q);
            if d.decision == Decision::Detectable {
                assert!(d.necessary.holds);
            }
            if block_sufficient(&c, &Matrix::diag(&[a])).unwrap() {
                assert_eq!(d.decision, Decision::Detectable);
            }
        }
    }

    #[test]
    fn completion_of_squares_gap_is_psd() {
        let mut r = rng(52);
        for _ in 0..100 {
            let n = r.random_range(1..=3);
            let c_rows = r.random_range(1..=n);
            let channel = random_channel(&mut r);
            let a = random_matrix(&mut r, n, n);
            let c = random_matrix(&mut r, c_rows, n);
            let x1 = &random_psd(&mut r, n, n) + &Matrix::identity(n).scale(0.1);
            let x2 = &random_psd(&mut r, n, n) + &Matrix::identity(n).scale(0.1);
            let l = random_matrix(&mut r, n, c_rows);
            let (g1, g2) = g_operators(&channel, &a, &c, &x1, &x2).unwrap();
            let (p1, p2) = psi_operators(&channel, &a, &c, &l, &x1, &x2);
            assert!(psd_check(&(&p1 - &g1), 1e-9));
            assert!(psd_check(&(&p2 - &g2), 1e-9));
            let best = minimizing_gain(&a, &c, &x2).unwrap();
            let (b1, b2) = psi_operators(&channel, &a, &c, &best, &x1, &x2);
            assert!((&b1 - &g1).max_abs() <= 1e-10 * g1.max_abs().max(1.0));
            assert!((&b2 - &g2).max_abs() <= 1e-10 * g2.max_abs().max(1.0));
        }
    }

    #[test]
    fn g_operators_swap_under_mirrored_channel() {
        let mut r = rng(53);
        let a = random_matrix(&mut r, 2, 2);
        let c = random_matrix(&mut r, 1, 2);
        let x1 = &random_psd(&mut r, 2, 2) + &Matrix::identity(2);
        let x2 = &random_psd(&mut r, 2, 2) + &Matrix::identity(2);
        // (1 − q, p) ↔ (q, 1 − p) exchanges when p' = 1 − p and q' = 1 − q
        let c1 = ch(0.3, 0.4);
        let c2 = ch(0.7, 0.6);
        let (g1, g2) = g_operators(&c1, &a, &c, &x1, &x2).unwrap();
        let (h1, h2) = g_operators(&c2, &a, &c, &x1, &x2).unwrap();
        assert!((&g1 - &h2).max_abs() < 1e-12);
        assert!((&g2 - &h1).max_abs() < 1e-12);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let c = Matrix::row_vector(&[0.0, 0.0]);
        let x = Matrix::identity(2);
        assert!(matches!(
            g_operators(&ch(0.3, 0.3), &Matrix::identity(2), &c, &x, &x),
            Err(Error::SingularInnovation)
        ));
    }
}
