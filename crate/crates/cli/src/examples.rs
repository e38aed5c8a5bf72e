//! Built-in scenario files.

use jumpest_core::estimators::EstimatorKind;
use jumpest_core::sim::{singer_scenario, SingerParams};
use jumpest_core::{CdreConfig, ChannelParams, InitRule, Matrix};

use crate::config::{ConfigDocument, PlantSection, SimSection};

pub const NAMES: [&str; 2] = ["singer", "paper51"];

/// Three-sensor plant whose detectability hinges on the second and third channels.
pub fn three_sensor() -> ConfigDocument {
    ConfigDocument {
        plant: PlantSection {
            a: Matrix::from_rows(&[[1.0, 0.0, 0.0], [1.0, 1.2, 0.0], [1.0, 1.5, 1.3]]),
            c: Matrix::identity(3),
            q: Matrix::diag(&[1.0, 1.0, 0.0]),
            r_diag: vec![1.0; 3],
            x0_mean: Some(vec![0.0; 3]),
            x0_cov: Some(Matrix::identity(3)),
        },
        channels: [(0.5, 0.2), (0.6, 0.32), (0.7, 0.51)]
            .into_iter()
            .map(|(p, q)| ChannelParams { p, q })
            .collect(),
        solver: CdreConfig::default(),
        sim: SimSection::default(),
    }
}

/// Singer tracking model with three lossy sensors; position is entry (3, 3).
pub fn singer() -> ConfigDocument {
    let params = SingerParams::default();
    let sc = singer_scenario(&params).expect("default Singer parameters are valid");
    ConfigDocument {
        plant: PlantSection {
            a: sc.plant.a,
            c: sc.plant.c,
            q: sc.plant.q,
            r_diag: sc.plant.r_diag,
            x0_mean: Some(sc.plant.x0_mean),
            x0_cov: Some(sc.plant.x0_cov),
        },
        channels: sc.channels,
        solver: sc.solver,
        sim: SimSection {
            horizon: params.horizon,
            trials: params.trials,
            seed: params.seed,
            estimators: vec![EstimatorKind::Os, EstimatorKind::Los, EstimatorKind::Tvkf],
            entries: vec![[3, 3]],
            init: InitRule::Stationary,
        },
    }
}

pub fn by_name(name: &str) -> Option<ConfigDocument> {
    match name {
        "singer" => Some(singer()),
        "paper51" => Some(three_sensor()),
        _ => None,
    }
}
