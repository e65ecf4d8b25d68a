//! Scenario runner for the packetized-energy simulator: configuration files,
//! closed-loop runs, parameter sweeps, CSV/JSON outputs and reporting.

pub mod config;
pub mod io;
pub mod presets;
pub mod report;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::{Method, Scenario};
pub use run::{run_scenario, run_scenario_with, RayonExecutor, RunRecord, StepRow};
pub use sweep::{sweep, Axis, SweepCell, SweepGrid};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("step {step}, {module}: {msg}")]
    Run {
        step: usize,
        module: &'static str,
        msg: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("signal: {0}")]
    Signal(#[from] pem_core::signals::SignalError),
    #[error("scoring: {0}")]
    Score(#[from] pem_core::scoring::ScoreError),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
