use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HbmoError>;

#[derive(Debug, Error)]
pub enum HbmoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("CFL condition violated: solver dt {dt:e} exceeds the admissible maximum {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("phase extinct: interface is empty")]
    PhaseExtinct,

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("volume correction did not converge: phase {phase} residual {residual:e} (tol {tol:e})")]
    VolumeNonConvergence { phase: usize, residual: f64, tol: f64 },

    #[error("functional descent diverged after {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HbmoError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HbmoError::Config(vec![msg.into()])
    }

    /// Exit code convention of the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HbmoError::Config(_) | HbmoError::Parse { .. } | HbmoError::InvalidGrid(_) => 2,
            _ => 1,
        }
    }
}
