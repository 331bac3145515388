//! Distributed median consensus with clipped innovations.
//!
//! `N` agents each observe one distinct value through noise with decaying
//! bias. Over a random network that is connected only on average, every
//! agent's estimate converges to the median set of the values.
//!
//! Modules, bottom-up:
//! - [`topology`]: base graphs, link-dropout realizations, Laplacians, λ2
//! - [`observation`]: observation streams and recursive local averages
//! - [`schedule`]: decaying gains and their admissibility rules
//! - [`dmed`]: the synchronous update and the single-trial driver
//! - [`metrics`]: median set, distances and rate diagnostics
//! - [`harness`]: configuration, Monte-Carlo trials, CSV output

pub mod dmed;
pub mod harness;
pub mod metrics;
pub mod observation;
pub mod rng;
pub mod schedule;
pub mod topology;

pub use dmed::{clip_gain, run, step, NetworkState, Simulation, SimulationSetup};
pub use metrics::{MedianSet, MetricsRecord};
pub use observation::{LocalAverageState, ObservationParams};
pub use rng::{SeedTree, TrialSeed};
pub use schedule::{Schedule, ScheduleParams};
pub use topology::{GraphRealization, LaplacianMatrix, StaticGraph};
