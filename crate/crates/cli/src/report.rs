//! JSON report written by every command.

use std::fs;
use std::path::Path;

use jumpest_core::detect::NecessaryCheck;
use jumpest_core::estimators::EstimatorKind;
use jumpest_core::{Decision, DetectReport, Matrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub decision: Decision,
    /// Eigenvalues of `A` on the unit circle are controllable from `Q`.
    pub rank_condition: bool,
    pub necessary: NecessaryCheck,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoupled: Option<DetectReport>,
    /// Why the per-block test was skipped, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoupled_skipped: Option<String>,
    pub riccati: DetectReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CareSection {
    pub cost: f64,
    pub rho_closed: f64,
    pub residual: f64,
    pub iterations: usize,
    pub stabilizing: bool,
    pub y: Vec<Matrix>,
    /// One estimator gain per joint mode, mode 1 = every packet dropped.
    pub gains: Vec<Matrix>,
    /// `Σ_i Y_i`.
    pub error_cov: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosSection {
    pub gain: Matrix,
    pub block_gains: Vec<Matrix>,
    pub block_rho: Vec<f64>,
    pub error_cov: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub block: usize,
    pub size: usize,
    /// `1 − 1 / Π max{|λ|², 1}` over the block's eigenvalues.
    pub lambda_c: f64,
    pub q: f64,
    pub passes_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WonhamSection {
    pub t: Matrix,
    pub condition: f64,
    pub block_sizes: Vec<usize>,
    pub a_transformed: Matrix,
    pub c_transformed: Matrix,
    pub verified: bool,
    pub blocks: Vec<BlockSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyLevel {
    pub estimator: EstimatorKind,
    /// 1-based entry.
    pub entry: [usize; 2],
    pub empirical: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theoretical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub csv: String,
    pub path_csv: String,
    /// Averages over the last ten steps.
    pub steady: Vec<SteadyLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub x0_mean: Vec<f64>,
    pub x0_cov: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub care: Option<CareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los: Option<LosSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wonham: Option<WonhamSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
}

impl ReportDocument {
    pub fn new(command: &str, x0_mean: Vec<f64>, x0_cov: Matrix) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: None,
            x0_mean,
            x0_cov,
            analysis: None,
            care: None,
            los: None,
            wonham: None,
            simulation: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("report: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
