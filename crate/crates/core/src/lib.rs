//! Optimal stationary state estimation for linear plants whose sensor
//! measurements travel to a remote estimator over independent two-state
//! Markov packet-drop channels.
//!
//! The crate covers the whole pipeline:
//!
//! * [`channels`]: per-channel loss models and the joint `2^m`-mode chain,
//! * [`mjls`]: the Markov jump form of the plant and its second-moment operators,
//! * [`riccati`]: coupled Riccati / Lyapunov solvers,
//! * [`detect`]: mean-square detectability tests and the block-triangular decomposition,
//! * [`estimators`]: optimal (OS), locally optimal (LOS) and time-varying Kalman estimators,
//! * [`sim`]: seeded Monte Carlo verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod detect;
pub mod error;
pub mod estimators;
pub mod matrix;
pub mod mjls;
pub mod riccati;
pub mod sim;

#[cfg(test)]
pub(crate) mod testutil;

pub use channels::{ChannelParams, InitRule, JointChain};
pub use detect::{Decision, DetectReport, WonhamForm};
pub use error::{Error, Result};
pub use estimators::{Estimator, EstimatorKind, EstimatorState};
pub use matrix::Matrix;
pub use mjls::{GainTable, JumpModel, PlantModel};
pub use riccati::{CareSolution, CdreConfig, CdreInit, SubCareSolution};
pub use sim::{AggregateResult, Scenario};
