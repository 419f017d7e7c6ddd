//! Artifact-producing front end shared by the `crossway` binary and the
//! integration tests.

mod plotdata;
mod run;
mod sweep;

pub use plotdata::{emit_plotdata, PlotKind};
pub use run::{metrics_row, run_to_dir, vehicle_rows, RunReport, VehicleRow};
pub use sweep::{run_sweep, sweep_jobs, write_sweep, AggregateRow, SweepJob, SweepResult};

use crate::config::{Algorithm, ConfigError, ScenarioConfig};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "CROSSWAY_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("unknown plot kind `{0}` (expected halts_bar, travel_time_series, speed_series, grant_timeline or mode_timeline)")]
    UnknownKind(String),
    #[error("{THREADS_ENV} must be a positive integer, got `{0}`")]
    Threads(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Input {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub algorithm: Option<Algorithm>,
    pub duration_s: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), ConfigError> {
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(a) = self.algorithm {
            cfg.run.algorithm = a;
            if let Some(sweep) = cfg.sweep.as_mut() {
                sweep.algorithms = vec![a];
            }
        }
        if let Some(d) = self.duration_s {
            cfg.run.duration_s = d;
        }
        cfg.validate()
    }
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Threads(v)),
        },
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}
