//! The synchronous median-consensus update and the per-trial driver.
//!
//! Each agent moves against its disagreement with active neighbours (gain
//! `beta_t`) and against its own innovation `x_n - theta_bar_n` (gain
//! `alpha_t`), where the innovation is rescaled so its magnitude never
//! exceeds `gamma_t`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::metrics::{self, MedianSet, MetricsError, MetricsRecord, RateExponents};
use crate::observation::{LocalAverageState, ObservationError, ObservationParams};
use crate::rng::{Purpose, TrialSeed};
use crate::schedule::{InvalidSchedule, Schedule};
use crate::topology::{build_laplacian, sample_dropout, EdgeSet, GraphRealization, StaticGraph, TopologyError};

#[derive(Debug, Error)]
pub enum DmedError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("estimate of agent {agent} became non-finite at t={t}")]
    NonFinite { t: u64, agent: usize },
    #[error("record_every must be at least 1")]
    ZeroRecordInterval,
    #[error("schedule assumes bias exponent {schedule} but observations use {observation}")]
    DeltaMismatch { schedule: f64, observation: f64 },
    #[error(transparent)]
    Schedule(#[from] InvalidSchedule),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Stacked estimates and the local averages they are pulled toward.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub theta_bar: Vec<f64>,
    pub t: u64,
}

impl NetworkState {
    pub fn new(x: Vec<f64>, theta_bar: Vec<f64>, t: u64) -> Result<Self, DmedError> {
        if x.len() != theta_bar.len() {
            return Err(DmedError::Dimension {
                what: "local averages",
                expected: x.len(),
                got: theta_bar.len(),
            });
        }
        Ok(Self { x, theta_bar, t })
    }

    pub fn n_agents(&self) -> usize {
        self.x.len()
    }

    pub fn mean(&self) -> f64 {
        metrics::mean(&self.x)
    }
}

/// Clipping gains applied at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipDiagnostics {
    pub k: Vec<f64>,
    pub num_clipped: usize,
}

/// `1` when `|x_n - theta_bar_n| <= gamma_t`, else `gamma_t / |x_n - theta_bar_n|`.
pub fn clip_gain(x_n: f64, theta_bar_n: f64, gamma_t: f64) -> f64 {
    let gap = (x_n - theta_bar_n).abs();
    if gap <= gamma_t {
        1.0
    } else {
        gamma_t / gap
    }
}

pub fn clip_diagnostics(x: &[f64], theta_bar: &[f64], gamma_t: f64) -> ClipDiagnostics {
    let k: Vec<f64> = x
        .iter()
        .zip(theta_bar)
        .map(|(&xn, &tn)| clip_gain(xn, tn, gamma_t))
        .collect();
    let num_clipped = k.iter().filter(|&&kn| kn < 1.0).count();
    ClipDiagnostics { k, num_clipped }
}

fn check_dims(state: &NetworkState, realization: &GraphRealization<'_>) -> Result<(), DmedError> {
    let n = realization.n_nodes();
    if state.x.len() != n {
        return Err(DmedError::Dimension {
            what: "estimates",
            expected: n,
            got: state.x.len(),
        });
    }
    if state.theta_bar.len() != n {
        return Err(DmedError::Dimension {
            what: "local averages",
            expected: n,
            got: state.theta_bar.len(),
        });
    }
    Ok(())
}

/// One synchronous update of every agent from the time-`t` values.
///
/// The returned state carries `x(t+1)` and `t+1`; its `theta_bar` is still
/// the time-`t` snapshot and must be replaced by the caller.
pub fn step(
    state: &NetworkState,
    realization: &GraphRealization<'_>,
    schedule: &Schedule,
) -> Result<(NetworkState, ClipDiagnostics), DmedError> {
    check_dims(state, realization)?;
    let t = state.t;
    let (alpha, beta, gamma) = (schedule.alpha(t), schedule.beta(t), schedule.gamma(t));
    let x = &state.x;

    // sum over active neighbours m of (x_n - x_m)
    let mut disagreement = vec![0.0; x.len()];
    for &(i, j) in realization.edges() {
        let d = x[i] - x[j];
        disagreement[i] += d;
        disagreement[j] -= d;
    }

    let clip = clip_diagnostics(x, &state.theta_bar, gamma);
    let mut next = Vec::with_capacity(x.len());
    for n in 0..x.len() {
        let innovation = clip.k[n] * (x[n] - state.theta_bar[n]);
        let v = x[n] - beta * disagreement[n] - alpha * innovation;
        if !v.is_finite() {
            return Err(DmedError::NonFinite { t, agent: n });
        }
        next.push(v);
    }
    Ok((
        NetworkState {
            x: next,
            theta_bar: state.theta_bar.clone(),
            t: t + 1,
        },
        clip,
    ))
}

/// Dense evaluation of `x(t+1) = (I - beta_t L(t)) x(t) - alpha_t K_t (x(t) - theta_bar(t))`.
///
/// Reference for [`step`]; allocates an `N x N` matrix.
pub fn step_matrix_form(
    state: &NetworkState,
    realization: &GraphRealization<'_>,
    schedule: &Schedule,
) -> Result<Vec<f64>, DmedError> {
    check_dims(state, realization)?;
    let n = state.x.len();
    let t = state.t;
    let l = build_laplacian(realization).into_matrix();
    let x = DVector::from_column_slice(&state.x);
    let theta_bar = DVector::from_column_slice(&state.theta_bar);
    let k = clip_diagnostics(&state.x, &state.theta_bar, schedule.gamma(t)).k;
    let k = DMatrix::from_diagonal(&DVector::from_vec(k));
    let consensus = DMatrix::<f64>::identity(n, n) - l * schedule.beta(t);
    let next = consensus * &x - k * (&x - theta_bar) * schedule.alpha(t);
    Ok(next.iter().copied().collect())
}

/// Everything one trial needs besides its seed.
#[derive(Clone, Debug)]
pub struct SimulationSetup {
    pub graph: StaticGraph,
    pub p_drop: f64,
    pub observation: ObservationParams,
    pub schedule: Schedule,
    pub x0: Vec<f64>,
    pub record_every: u64,
    pub eps1: f64,
}

impl SimulationSetup {
    /// Setup with `x(0) = 0`, records every 10 steps and
    /// `eps1 = (tau1 - tau2) / 2`.
    pub fn new(
        graph: StaticGraph,
        p_drop: f64,
        observation: ObservationParams,
        schedule: Schedule,
    ) -> Result<Self, DmedError> {
        let n = graph.n_nodes();
        let p = schedule.params();
        let setup = Self {
            graph,
            p_drop,
            observation,
            x0: vec![0.0; n],
            record_every: 10,
            eps1: 0.5 * (p.tau1 - p.tau2),
            schedule,
        };
        setup.check()?;
        Ok(setup)
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self, DmedError> {
        self.x0 = x0;
        self.check()?;
        Ok(self)
    }

    pub fn with_record_every(mut self, record_every: u64) -> Result<Self, DmedError> {
        self.record_every = record_every;
        self.check()?;
        Ok(self)
    }

    pub fn with_eps1(mut self, eps1: f64) -> Self {
        self.eps1 = eps1;
        self
    }

    pub fn check(&self) -> Result<(), DmedError> {
        let n = self.graph.n_nodes();
        if self.observation.n_agents() != n {
            return Err(DmedError::Dimension {
                what: "local values",
                expected: n,
                got: self.observation.n_agents(),
            });
        }
        if self.x0.len() != n {
            return Err(DmedError::Dimension {
                what: "initial estimates",
                expected: n,
                got: self.x0.len(),
            });
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(TopologyError::InvalidDropout(self.p_drop).into());
        }
        if self.record_every == 0 {
            return Err(DmedError::ZeroRecordInterval);
        }
        let sd = self.schedule.params().delta;
        if sd != self.observation.delta() {
            return Err(DmedError::DeltaMismatch {
                schedule: sd,
                observation: self.observation.delta(),
            });
        }
        Ok(())
    }

    pub fn rates(&self) -> RateExponents {
        let p = self.schedule.params();
        RateExponents::new(p.tau1, p.tau2, p.tau3, self.eps1)
    }
}

/// Step-by-step driver for one trial.
///
/// At step `t`: the observations `theta(t)` are drawn, the graph
/// realization for `t` is sampled, the estimates are updated with the
/// local averages `theta_bar(t)`, and then `theta(t)` is folded into the
/// averages to give `theta_bar(t+1)`. `theta_bar(0)` is `theta(0)`.
pub struct Simulation<'a> {
    setup: &'a SimulationSetup,
    seed: TrialSeed,
    state: NetworkState,
    averages: LocalAverageState,
    median: MedianSet,
    rates: RateExponents,
}

impl<'a> Simulation<'a> {
    pub fn new(setup: &'a SimulationSetup, seed: TrialSeed) -> Result<Self, DmedError> {
        setup.check()?;
        let first = setup.observation.observe_all(0, &seed)?;
        let p = setup.schedule.params();
        let averages = LocalAverageState::new(first, p.c_mu, p.mu)?;
        let state = NetworkState::new(setup.x0.clone(), averages.theta_bar().to_vec(), 0)?;
        Ok(Self {
            setup,
            seed,
            state,
            averages,
            median: metrics::median_set(setup.observation.theta())?,
            rates: setup.rates(),
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn median(&self) -> &MedianSet {
        &self.median
    }

    /// Advances from `t` to `t+1`, returning the clipping applied at `t`.
    pub fn advance(&mut self) -> Result<ClipDiagnostics, DmedError> {
        let t = self.state.t;
        let observations = self.setup.observation.observe_all(t, &self.seed)?;
        let mut rng = self.seed.stream(Purpose::Dropout, 0, t);
        let realization = sample_dropout(&self.setup.graph, self.setup.p_drop, &mut rng)?;
        let (mut next, clip) = step(&self.state, &realization, &self.setup.schedule)?;
        self.averages.update(&observations)?;
        next.theta_bar.copy_from_slice(self.averages.theta_bar());
        self.state = next;
        Ok(clip)
    }

    /// Metrics of the current state.
    pub fn record(&self) -> MetricsRecord {
        let gamma = self.setup.schedule.gamma(self.state.t);
        let clipped = clip_diagnostics(&self.state.x, &self.state.theta_bar, gamma).num_clipped;
        MetricsRecord::compute(self.state.t, &self.state.x, &self.median, &self.rates, clipped)
    }
}

/// Runs one trial for `t_max` steps, recording at `t = 0, r, 2r, ...`
/// (`r = record_every`) up to and including `t_max`.
pub fn run(
    setup: &SimulationSetup,
    t_max: u64,
    seed: &TrialSeed,
) -> Result<Vec<MetricsRecord>, DmedError> {
    let mut sim = Simulation::new(setup, *seed)?;
    let mut out = Vec::with_capacity((t_max / setup.record_every) as usize + 1);
    loop {
        if sim.state().t % setup.record_every == 0 {
            out.push(sim.record());
        }
        if sim.state().t >= t_max {
            break;
        }
        sim.advance()?;
    }
    Ok(out)
}
