//! Seeded Monte Carlo harness for the estimators.
//!
//! Every trial draws from its own counter-keyed streams, so trials can run on
//! any number of workers. Partial sums are formed over fixed chunks of trial
//! indices and folded in index order, which keeps the aggregate bit-identical
//! regardless of the worker count.

mod csv;
mod singer;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::csv::{emit_csv, path_csv_path};
pub use self::singer::{singer_channels, singer_scenario, SingerParams};

use crate::channels::{sample_path, ChannelParams, InitRule};
use crate::detect::{wonham_decompose, WonhamForm, WONHAM_TOL};
use crate::error::{Error, Result};
use crate::estimators::{build_os, build_tvkf, los_theoretical_cov, solve_los, step, Estimator, EstimatorKind};
use crate::matrix::{symmetric_eigen, Matrix};
use crate::mjls::{assemble, JumpModel, PlantModel};
use crate::riccati::{cdre_iterate, sum, CdreConfig};

/// Trials per partial sum. Fixed so that the fold order never depends on scheduling.
const CHUNK: usize = 64;

/// Stream offsets for the noise generators; channel streams use `0..m`.
const STREAM_X0: u64 = 1 << 32;
const STREAM_W: u64 = STREAM_X0 + 1;
const STREAM_V: u64 = STREAM_X0 + 2;

/// Last this many steps are averaged for steady-state readouts.
pub const STEADY_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub plant: PlantModel,
    pub channels: Vec<ChannelParams>,
    pub horizon: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// Used by LOS; derived from `(A, C)` when absent.
    pub wonham: Option<WonhamForm>,
    pub solver: CdreConfig,
    pub init: InitRule,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.trials == 0 {
            return Err(Error::InvalidModel("horizon and trials must both be at least 1".into()));
        }
        self.plant.validate()?;
        self.solver.validate()?;
        if self.channels.len() != self.plant.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} channels for {} sensors",
                self.channels.len(),
                self.plant.output_dim()
            )));
        }
        if let InitRule::Fixed(bits) = &self.init {
            if bits.len() != self.channels.len() {
                return Err(Error::DimensionMismatch("fixed initial channel state has the wrong length".into()));
            }
        }
        Ok(())
    }
}

/// Estimators built for a scenario plus the noise factors used to sample it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: JumpModel,
    pub estimators: Vec<Estimator>,
    /// Stationary error covariance per estimator, when one exists.
    pub theory: Vec<Option<Matrix>>,
    /// Plant that generates the data. Starts as the scenario plant.
    pub truth: PlantModel,
}

impl Prepared {
    pub fn new(sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        let model = assemble(&sc.plant, &sc.channels)?;
        let mut estimators = Vec::with_capacity(sc.estimators.len());
        let mut theory = Vec::with_capacity(sc.estimators.len());
        for &kind in &sc.estimators {
            match kind {
                EstimatorKind::Os => {
                    let sol = cdre_iterate(&model, &sc.solver)?;
                    theory.push(Some(sum(&sol.y)));
                    estimators.push(build_os(&model, &sol)?);
                }
                EstimatorKind::Los => {
                    let wf = match &sc.wonham {
                        Some(wf) => wf.clone(),
                        None => wonham_decompose(&sc.plant.a, &sc.plant.c, WONHAM_TOL)?,
                    };
                    let (est, _) = solve_los(&model, &wf, &sc.solver)?;
                    theory.push(Some(los_theoretical_cov(&model, &est)?.0));
                    estimators.push(est);
                }
                EstimatorKind::Tvkf => {
                    theory.push(None);
                    estimators.push(build_tvkf(&model));
                }
            }
        }
        Ok(Self {
            truth: sc.plant.clone(),
            model,
            estimators,
            theory,
        })
    }
}

/// Everything one trial produced. `errors[e][k - 1]` is `x(k) − x̂(k)` for estimator `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub x0: Vec<f64>,
    /// Arrival bits `γ(0..horizon)`.
    pub gamma: Vec<Vec<bool>>,
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub errors: Vec<Vec<Vec<f64>>>,
}

/// Seed for trial `trial`, decorrelated from neighbouring indices.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// `L` with `L Lᵀ = m` for a PSD `m`.
fn psd_factor(m: &Matrix) -> Result<Matrix> {
    let eig = symmetric_eigen(m)?;
    let scale: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(&eig.vectors * &Matrix::diag(&scale))
}

fn gaussian(r: &mut ChaCha8Rng, factor: &Matrix, mean: Option<&[f64]>) -> Vec<f64> {
    let z: Vec<f64> = (0..factor.cols()).map(|_| StandardNormal.sample(r)).collect();
    let mut x = factor.mul_vec(&z);
    if let Some(mean) = mean {
        for (x, m) in x.iter_mut().zip(mean) {
            *x += m;
        }
    }
    x
}

/// Runs every prepared estimator on one shared realization.
pub fn simulate_trial(sc: &Scenario, prep: &Prepared, trial: usize) -> Result<TrialRecord> {
    let plant = &prep.truth;
    let (n, m) = (plant.state_dim(), plant.output_dim());
    let seed = trial_seed(sc.master_seed, trial);
    let gamma = sample_path(&sc.channels, sc.horizon, seed, &sc.init);
    let x0 = gaussian(&mut stream(seed, STREAM_X0), &psd_factor(&plant.x0_cov)?, Some(&plant.x0_mean));
    let (mut rw, mut rv) = (stream(seed, STREAM_W), stream(seed, STREAM_V));
    let wf = psd_factor(&plant.q)?;
    let vf = Matrix::diag(&plant.r_diag.iter().map(|r| r.max(0.0).sqrt()).collect::<Vec<_>>());

    let mut states: Vec<_> = prep.estimators.iter().map(Estimator::initial_state).collect();
    let mut errors = vec![Vec::with_capacity(sc.horizon); prep.estimators.len()];
    let mut x = x0.clone();
    let mut rec_w = Vec::with_capacity(sc.horizon);
    let mut rec_v = Vec::with_capacity(sc.horizon);
    let mut traj = Vec::with_capacity(sc.horizon);
    for g in &gamma {
        let v = gaussian(&mut rv, &vf, None);
        let w = gaussian(&mut rw, &wf, None);
        let cx = plant.c.mul_vec(&x);
        let y: Vec<f64> = (0..m).map(|i| if g[i] { cx[i] + v[i] } else { 0.0 }).collect();
        for (st, est) in states.iter_mut().zip(&prep.estimators) {
            *st = step(est, st, &y, g)?;
        }
        x = plant.a.mul_vec(&x).iter().zip(&w).map(|(a, b)| a + b).collect();
        for (errs, st) in errors.iter_mut().zip(&states) {
            errs.push((0..n).map(|i| x[i] - st.xhat[i]).collect());
        }
        traj.push(x.clone());
        rec_w.push(w);
        rec_v.push(v);
    }
    Ok(TrialRecord {
        x0,
        gamma,
        w: rec_w,
        v: rec_v,
        states: traj,
        errors,
    })
}

/// Empirical error statistics of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSeries {
    pub kind: EstimatorKind,
    /// `cov[k - 1]` is the mean of `e(k) e(k)ᵀ` over trials.
    pub cov: Vec<Matrix>,
    /// 95% half-widths per entry, NaN for a single trial.
    pub ci: Vec<Matrix>,
    pub theory: Option<Matrix>,
}

impl EstimatorSeries {
    /// Entry `(i, j)` (0-based) averaged over the last [`STEADY_WINDOW`] steps.
    pub fn steady(&self, i: usize, j: usize) -> f64 {
        let start = self.cov.len().saturating_sub(STEADY_WINDOW);
        let tail = &self.cov[start..];
        tail.iter().map(|c| c[(i, j)]).sum::<f64>() / tail.len() as f64
    }

    pub fn steady_trace(&self) -> f64 {
        (0..self.cov[0].rows()).map(|i| self.steady(i, i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub trials: usize,
    pub seed: u64,
    pub horizon: usize,
    pub series: Vec<EstimatorSeries>,
    /// Channel path of trial 0.
    pub path: Vec<Vec<bool>>,
    /// True state of trial 0 and the estimates of every estimator, per step.
    pub trajectory: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<Vec<f64>>>,
    pub x0_mean: Vec<f64>,
    pub x0_cov: Matrix,
}

impl AggregateResult {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorSeries> {
        self.series.iter().find(|s| s.kind == kind)
    }
}

/// Per-entry sums of `e eᵀ` and of its square, laid out `[estimator][k][i * n + j]`.
#[derive(Clone)]
struct Partial {
    sum: Vec<Vec<f64>>,
    sumsq: Vec<Vec<f64>>,
}

impl Partial {
    fn new(estimators: usize, len: usize) -> Self {
        Self {
            sum: vec![vec![0.0; len]; estimators],
            sumsq: vec![vec![0.0; len]; estimators],
        }
    }

    fn add_trial(&mut self, rec: &TrialRecord, n: usize) {
        for (e, errs) in rec.errors.iter().enumerate() {
            for (k, err) in errs.iter().enumerate() {
                let base = k * n * n;
                for i in 0..n {
                    for j in 0..n {
                        let p = err[i] * err[j];
                        self.sum[e][base + i * n + j] += p;
                        self.sumsq[e][base + i * n + j] += p * p;
                    }
                }
            }
        }
    }

    fn merge(mut self, other: &Partial) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum).chain(self.sumsq.iter_mut().zip(&other.sumsq)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

/// Runs `sc.trials` trials on `workers` threads (all cores when `None`).
pub fn monte_carlo(sc: &Scenario, workers: Option<usize>) -> Result<AggregateResult> {
    let prep = Prepared::new(sc)?;
    monte_carlo_prepared(sc, &prep, workers)
}

pub fn monte_carlo_prepared(sc: &Scenario, prep: &Prepared, workers: Option<usize>) -> Result<AggregateResult> {
    let n = prep.truth.state_dim();
    let ne = prep.estimators.len();
    let len = sc.horizon * n * n;
    let chunks = sc.trials.div_ceil(CHUNK);
    let run_chunk = |c: usize| -> Result<Partial> {
        let mut part = Partial::new(ne, len);
        for t in c * CHUNK..((c + 1) * CHUNK).min(sc.trials) {
            part.add_trial(&simulate_trial(sc, prep, t)?, n);
        }
        Ok(part)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidModel(format!("cannot start worker pool: {e}")))?;
    let partials: Vec<Partial> = pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect::<Result<_>>())?;
    let total = partials.iter().fold(Partial::new(ne, len), |acc, p| acc.merge(p));

    let first = simulate_trial(sc, prep, 0)?;
    let nt = sc.trials as f64;
    let series = (0..ne)
        .map(|e| {
            let mut cov = Vec::with_capacity(sc.horizon);
            let mut ci = Vec::with_capacity(sc.horizon);
            for k in 0..sc.horizon {
                let s = &total.sum[e][k * n * n..(k + 1) * n * n];
                let ss = &total.sumsq[e][k * n * n..(k + 1) * n * n];
                let mean: Vec<f64> = s.iter().map(|x| x / nt).collect();
                let half: Vec<f64> = if sc.trials < 2 {
                    vec![f64::NAN; n * n]
                } else {
                    mean.iter()
                        .zip(ss)
                        .map(|(mu, sq)| {
                            let var = ((sq - nt * mu * mu) / (nt - 1.0)).max(0.0);
                            1.96 * (var / nt).sqrt()
                        })
                        .collect()
                };
                cov.push(Matrix::from_row_major(n, n, mean));
                ci.push(Matrix::from_row_major(n, n, half));
            }
            EstimatorSeries {
                kind: prep.estimators[e].kind,
                cov,
                ci,
                theory: prep.theory[e].clone(),
            }
        })
        .collect();
    let estimates = first
        .errors
        .iter()
        .map(|errs| {
            errs.iter()
                .zip(&first.states)
                .map(|(e, x)| x.iter().zip(e).map(|(x, e)| x - e).collect())
                .collect()
        })
        .collect();
    Ok(AggregateResult {
        trials: sc.trials,
        seed: sc.master_seed,
        horizon: sc.horizon,
        series,
        path: first.gamma,
        trajectory: first.states,
        estimates,
        x0_mean: prep.truth.x0_mean.clone(),
        x0_cov: prep.truth.x0_cov.clone(),
    })
}
