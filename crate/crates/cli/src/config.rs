//! TOML scenario files.
//!
//! ```toml
//! [plant]
//! a = [[1.0, 0.0], [0.5, 1.1]]
//! c = [[1.0, 0.0], [0.0, 1.0]]
//! q = [[1.0, 0.0], [0.0, 1.0]]
//! r_diag = [1.0, 1.0]
//!
//! [[channels]]
//! p = 0.5
//! q = 0.2
//!
//! [[channels]]
//! p = 0.6
//! q = 0.3
//!
//! [solver]
//! tol = 1e-11
//!
//! [sim]
//! trials = 10000
//! estimators = ["os", "los"]
//! entries = [[2, 2]]
//! ```

use std::fs;
use std::path::Path;

use jumpest_core::estimators::EstimatorKind;
use jumpest_core::{CdreConfig, ChannelParams, InitRule, Matrix, PlantModel, Scenario};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Matrix,
    pub c: Matrix,
    pub q: Matrix,
    pub r_diag: Vec<f64>,
    /// Zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_mean: Option<Vec<f64>>,
    /// Identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_cov: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// 1-based `(row, col)` covariance entries written to the CSV.
    /// All diagonal entries when empty.
    pub entries: Vec<[usize; 2]>,
    pub init: InitRule,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: 50,
            trials: 10_000,
            seed: 1,
            estimators: EstimatorKind::ALL.to_vec(),
            entries: Vec::new(),
            init: InitRule::Stationary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub plant: PlantSection,
    pub channels: Vec<ChannelParams>,
    #[serde(default)]
    pub solver: CdreConfig,
    #[serde(default)]
    pub sim: SimSection,
}

fn invalid(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

impl ConfigDocument {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and cross-checks a document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        doc.plant()?;
        doc.scenario()?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    pub fn plant(&self) -> Result<PlantModel, CliError> {
        let s = &self.plant;
        let n = s.a.rows();
        let mut plant = PlantModel::new(s.a.clone(), s.c.clone(), s.q.clone(), s.r_diag.clone()).map_err(|e| invalid("plant", e))?;
        if let Some(mean) = &s.x0_mean {
            if mean.len() != n {
                return Err(invalid("plant.x0_mean", format!("has {} entries, state dimension is {n}", mean.len())));
            }
            plant.x0_mean = mean.clone();
        }
        if let Some(cov) = &s.x0_cov {
            plant.x0_cov = cov.clone();
        }
        plant.validate().map_err(|e| invalid("plant", e))?;
        Ok(plant)
    }

    pub fn channels(&self) -> Result<Vec<ChannelParams>, CliError> {
        for (i, ch) in self.channels.iter().enumerate() {
            ch.validate().map_err(|e| invalid(&format!("channels[{}]", i + 1), e))?;
        }
        if self.channels.len() != self.plant.c.rows() {
            return Err(invalid(
                "channels",
                format!("{} channels for {} sensor rows of plant.c", self.channels.len(), self.plant.c.rows()),
            ));
        }
        Ok(self.channels.clone())
    }

    /// Requested covariance entries as 0-based pairs.
    pub fn entries(&self) -> Result<Vec<(usize, usize)>, CliError> {
        let n = self.plant.a.rows();
        if self.sim.entries.is_empty() {
            return Ok((0..n).map(|i| (i, i)).collect());
        }
        self.sim
            .entries
            .iter()
            .map(|&[i, j]| {
                if (1..=n).contains(&i) && (1..=n).contains(&j) {
                    Ok((i - 1, j - 1))
                } else {
                    Err(invalid("sim.entries", format!("[{i}, {j}] is outside 1..={n}")))
                }
            })
            .collect()
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        let sc = Scenario {
            plant: self.plant()?,
            channels: self.channels()?,
            horizon: self.sim.horizon,
            trials: self.sim.trials,
            master_seed: self.sim.seed,
            estimators: self.sim.estimators.clone(),
            wonham: None,
            solver: self.solver,
            init: self.sim.init.clone(),
        };
        self.entries()?;
        sc.validate().map_err(|e| invalid("sim", e))?;
        Ok(sc)
    }
}
