//! Experiment harness for the Neumann filtration equation: configuration,
//! initial data, verification presets and their CSV/verdict output.

pub mod cli;
pub mod config;
pub mod datum;
pub mod output;
pub mod presets;
pub mod rng;

use flab_core::analysis::AnalysisError;
use flab_core::mesh::MeshError;
use flab_core::reference::ReferenceError;
use flab_core::solver::SolverError;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig};
pub use output::Verdict;
pub use presets::{run_preset, PresetReport, PRESETS};

/// Exit statuses of the `flab` binary.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const VERDICT_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SOLVER_ABORT: i32 = 3;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown preset '{0}' (expected one of {list})", list = PRESETS.join(", "))]
    UnknownPreset(String),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("datum: {0}")]
    Reference(#[from] ReferenceError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("{0}")]
    Datum(String),
    #[error("{0}")]
    Usage(String),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver(_) => exit::SOLVER_ABORT,
            HarnessError::Analysis(_) => exit::VERDICT_FAILURE,
            _ => exit::USAGE,
        }
    }
}

/// Worker pool sized by `FLAB_THREADS`, defaulting to the machine's
/// parallelism.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let threads = match std::env::var("FLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| HarnessError::Usage(format!("FLAB_THREADS must be a positive integer (got '{v}')")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Usage(e.to_string()))
}
