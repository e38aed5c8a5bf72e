use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::channels::{ChannelParams, InitRule};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::matrix::Matrix;
use crate::mjls::PlantModel;
use crate::riccati::CdreConfig;

/// Singer manoeuvring-target model with acceleration, speed and position states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SingerParams {
    /// Sampling period in seconds.
    pub t: f64,
    /// Reciprocal of the manoeuvre time constant.
    pub alpha: f64,
    /// Acceleration variance.
    pub sigma_m2: f64,
    /// Measurement noise is `r_scale · I`.
    pub r_scale: f64,
    pub channels: Vec<ChannelParams>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SingerParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            alpha: 0.01,
            sigma_m2: 10.0,
            r_scale: 0.01,
            channels: singer_channels(),
            horizon: 50,
            trials: 10_000,
            seed: 20_240_601,
        }
    }
}

/// Channels `p = (0.2, 0.3, 0.2)`, `q = (0.85, 0.75, 0.8)`.
pub fn singer_channels() -> Vec<ChannelParams> {
    [(0.2, 0.85), (0.3, 0.75), (0.2, 0.8)]
        .into_iter()
        .map(|(p, q)| ChannelParams { p, q })
        .collect()
}

pub fn singer_scenario(params: &SingerParams) -> Result<Scenario> {
    let SingerParams { t, alpha, sigma_m2, r_scale, .. } = *params;
    if !(t > 0.0 && alpha > 0.0) || !(sigma_m2 >= 0.0) || !(r_scale > 0.0) {
        return Err(Error::InvalidModel(
            "Singer model needs T > 0, alpha > 0, sigma_m2 >= 0 and a positive noise scale".into(),
        ));
    }
    let a = Matrix::from_rows(&[[1.0, 0.0, 0.0], [t, 1.0, 0.0], [t * t / 2.0, t, 1.0]]);
    let (t2, t3, t4, t5) = (t.powi(2), t.powi(3), t.powi(4), t.powi(5));
    let q = Matrix::from_rows(&[
        [t, t2 / 2.0, t3 / 6.0],
        [t2 / 2.0, t3 / 3.0, t4 / 8.0],
        [t3 / 6.0, t4 / 8.0, t5 / 20.0],
    ])
    .scale(2.0 * alpha * sigma_m2);
    let plant = PlantModel::new(a, Matrix::identity(3), q, vec![r_scale; 3])?;
    Ok(Scenario {
        plant,
        channels: params.channels.clone(),
        horizon: params.horizon,
        trials: params.trials,
        master_seed: params.seed,
        estimators: vec![EstimatorKind::Os, EstimatorKind::Los, EstimatorKind::Tvkf],
        wonham: None,
        solver: CdreConfig::default(),
        init: InitRule::Stationary,
    })
}
