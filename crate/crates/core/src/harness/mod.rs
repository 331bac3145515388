//! Configuration, trial orchestration and CSV output.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

use crate::dmed::DmedError;
use crate::observation::ObservationError;
use crate::schedule::InvalidSchedule;
use crate::topology::TopologyError;

pub use config::{ExperimentConfig, GraphSection, GraphSource, InitialEstimate};
pub use experiment::{
    aggregate, run_experiment, run_recursion_experiment, run_trials, AggregateRow,
    AggregateSeries, RecursionRow, Stat, TrialResult,
};
pub use output::{emit_csv, parse_series, SeriesRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("trial {trial} failed")]
    Trial {
        trial: u64,
        #[source]
        source: DmedError,
    },
    #[error("trial results do not line up: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Schedule(#[from] InvalidSchedule),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Dmed(#[from] DmedError),
}
