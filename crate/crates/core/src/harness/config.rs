//! TOML experiment configuration.
//!
//! ```toml
//! [graph]
//! source = "random_geometric"   # or "edge_list" with `path = "..."`
//! nodes = 40
//! target_lambda2 = 1.8
//! p_drop = 0.1
//!
//! [observation]
//! theta = [1.0, 2.0, 3.0]
//! v0 = 10.0
//! delta = 1.0
//! noise_sigma = 2.0
//!
//! [schedule]
//! alpha0 = 1.0
//! tau1 = 0.6
//! beta0 = 0.1
//! tau2 = 0.2
//! gamma0 = 20.0
//! tau3 = 0.3
//! c_mu = 10.0
//! mu = 0.9
//!
//! [run]
//! t_max = 10000
//! n_trials = 100
//! base_seed = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dmed::SimulationSetup;
use crate::observation::{NoiseKind, ObservationParams};
use crate::rng::SeedTree;
use crate::schedule::{ScheduleParams, DEFAULT_EPS_BAR};
use crate::topology::{generate_with_target_lambda2, StaticGraph};

pub const DEFAULT_RECORD_EVERY: u64 = 10;
pub const DEFAULT_LAMBDA2_TOLERANCE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSection,
    pub observation: ObservationSection,
    pub schedule: ScheduleSection,
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum GraphSource {
    /// Generated from the experiment's base seed.
    RandomGeometric {
        nodes: usize,
        target_lambda2: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// Relative paths resolve against the config file's directory.
    EdgeList { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSection {
    #[serde(flatten)]
    pub source: GraphSource,
    #[serde(default)]
    pub p_drop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSection {
    pub theta: Vec<f64>,
    #[serde(default)]
    pub v0: f64,
    pub delta: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise: NoiseKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSection {
    pub alpha0: f64,
    pub tau1: f64,
    pub beta0: f64,
    pub tau2: f64,
    pub gamma0: f64,
    pub tau3: f64,
    pub c_mu: f64,
    pub mu: f64,
    #[serde(default = "default_eps_bar")]
    pub eps_bar: f64,
}

/// Scalar fill or one value per agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialEstimate {
    Fill(f64),
    Values(Vec<f64>),
}

impl Default for InitialEstimate {
    fn default() -> Self {
        InitialEstimate::Fill(0.0)
    }
}

impl InitialEstimate {
    pub fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            InitialEstimate::Fill(v) => vec![*v; n],
            InitialEstimate::Values(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub t_max: u64,
    pub n_trials: u64,
    pub base_seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub x0: InitialEstimate,
    /// Slack in the consensus-rate exponent; defaults to `(tau1 - tau2) / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
}

fn default_tolerance() -> f64 {
    DEFAULT_LAMBDA2_TOLERANCE
}

fn default_eps_bar() -> f64 {
    DEFAULT_EPS_BAR
}

fn default_record_every() -> u64 {
    DEFAULT_RECORD_EVERY
}

impl From<ScheduleParams> for ScheduleSection {
    fn from(p: ScheduleParams) -> Self {
        Self {
            alpha0: p.alpha0,
            tau1: p.tau1,
            beta0: p.beta0,
            tau2: p.tau2,
            gamma0: p.gamma0,
            tau3: p.tau3,
            c_mu: p.c_mu,
            mu: p.mu,
            eps_bar: p.eps_bar,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn schedule_params(&self) -> ScheduleParams {
        let s = &self.schedule;
        ScheduleParams {
            alpha0: s.alpha0,
            tau1: s.tau1,
            beta0: s.beta0,
            tau2: s.tau2,
            gamma0: s.gamma0,
            tau3: s.tau3,
            c_mu: s.c_mu,
            mu: s.mu,
            delta: self.observation.delta,
            eps_bar: s.eps_bar,
        }
    }

    pub fn observation_params(&self) -> Result<ObservationParams, HarnessError> {
        let o = &self.observation;
        Ok(ObservationParams::new(o.theta.clone(), o.v0, o.delta, o.noise_sigma)?.with_noise(o.noise))
    }

    /// Checks everything that can be checked without building the graph.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.schedule_params().validate()?;
        self.observation_params()?;
        if self.run.n_trials == 0 {
            return Err(HarnessError::Config("n_trials must be at least 1".into()));
        }
        if self.run.t_max == 0 {
            return Err(HarnessError::Config("t_max must be at least 1".into()));
        }
        if self.run.record_every == 0 {
            return Err(HarnessError::Config("record_every must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.graph.p_drop) {
            return Err(HarnessError::Config(format!(
                "p_drop must lie in [0, 1), got {}",
                self.graph.p_drop
            )));
        }
        Ok(())
    }

    pub fn seeds(&self) -> SeedTree {
        SeedTree::new(self.run.base_seed)
    }

    /// Builds or loads the base graph.
    pub fn build_graph(&self, base_dir: Option<&Path>) -> Result<StaticGraph, HarnessError> {
        match &self.graph.source {
            GraphSource::RandomGeometric {
                nodes,
                target_lambda2,
                tolerance,
            } => {
                let mut rng = self.seeds().graph_rng();
                let (g, radius) =
                    generate_with_target_lambda2(*nodes, *target_lambda2, *tolerance, &mut rng)?;
                log::info!(
                    "generated random geometric graph: {} nodes, {} edges, radius {radius:.4}, lambda2 {:.4}",
                    nodes,
                    g.edge_count(),
                    g.lambda2()
                );
                Ok(g)
            }
            GraphSource::EdgeList { path } => {
                let resolved = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Ok(StaticGraph::read_edge_list(&resolved)?)
            }
        }
    }

    /// Validates and assembles the per-trial setup around `graph`.
    pub fn setup_with_graph(&self, graph: StaticGraph) -> Result<SimulationSetup, HarnessError> {
        self.validate()?;
        let n = graph.n_nodes();
        let schedule = self.schedule_params().into_schedule()?;
        let mut setup = SimulationSetup::new(graph, self.graph.p_drop, self.observation_params()?, schedule)?
            .with_x0(self.run.x0.expand(n))?
            .with_record_every(self.run.record_every)?;
        if let Some(eps1) = self.run.eps1 {
            setup = setup.with_eps1(eps1);
        }
        Ok(setup)
    }

    pub fn setup(&self, base_dir: Option<&Path>) -> Result<SimulationSetup, HarnessError> {
        self.validate()?;
        let graph = self.build_graph(base_dir)?;
        self.setup_with_graph(graph)
    }
}
