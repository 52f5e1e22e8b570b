//! Scenario library, run orchestration, persistence and reports.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod data;
pub mod report;
pub mod run;

pub use config::{DataSpec, DiagnosticsSpec, GridSpec, ModeSpec, ScenarioConfig, ScenarioKind, SolverSpec};
pub use data::build_initial_data;
pub use report::{report, Summary};
pub use run::{load_manifest, run, simulate, Manifest, MocSummary, RunArtifacts, RunStatus, Simulation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error("initial density reaches {rho_min:.3e} below the floor {floor:.3e}; reduce data.rho_amplitude")]
    Vacuum { rho_min: f64, floor: f64 },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("missing artifacts: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Missing(Vec<PathBuf>),
}
