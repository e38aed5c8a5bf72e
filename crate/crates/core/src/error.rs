use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular (pivot {pivot:.3e} below tolerance)")]
    SingularMatrix { pivot: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid channel parameters p={p}, q={q}: both must lie strictly inside (0, 1)")]
    InvalidChannel { p: f64, q: f64 },

    #[error("{count} channels exceed the cap of {cap}")]
    TooManyChannels { count: usize, cap: usize },

    #[error("mode {mode} is out of range 1..={max}")]
    OutOfRange { mode: usize, max: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("Riccati recursion diverged after {iterations} iterations (max entry {norm:.3e})")]
    Diverged { iterations: usize, norm: f64 },

    #[error("Riccati recursion did not converge in {iterations} iterations (last step {step:.3e})")]
    NotConverged { iterations: usize, step: f64 },

    #[error("closed loop is not mean-square stable (spectral radius {rho:.6})")]
    Unstable { rho: f64 },

    #[error("solution is not mean-square stabilizing")]
    NotStabilizing,

    #[error("pair is not detectable: {0}")]
    NotDetectable(String),

    #[error("{outputs} outputs exceed state dimension {states}")]
    TooManyOutputs { outputs: usize, states: usize },

    #[error("no block-triangular decomposition pairs output {output} with its own block")]
    NoDecomposition { output: usize },

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("subsystem {block} is not mean-square detectable over its channel")]
    SubsystemUndetectable { block: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
