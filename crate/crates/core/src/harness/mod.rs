//! Reproducible runs: configuration, artifact bundles, replay verification
//! and metrics.

mod bundle;
mod config;
mod metrics;

use std::path::PathBuf;

use thiserror::Error;

use crate::mission::MissionError;
use crate::sim::SimError;
use crate::voxel_map::MapError;

pub use bundle::{replay_and_verify, run_mission, RunOutcome, VerifyReport, Violation, BUNDLE_FILES};
pub use config::{MissionSettings, RunConfig};
pub use metrics::{map_metrics, reachable_coverage, Metrics, ReachableCoverage};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{file} line {line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Map(#[from] MapError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
