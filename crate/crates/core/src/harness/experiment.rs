//! Monte-Carlo trial orchestration and aggregation.

use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::dmed::{self, SimulationSetup};
use crate::metrics::MetricsRecord;
use crate::observation::{lemma1_recursion, RecursionParams};
use crate::rng::{Purpose, SeedTree};

/// Mean and sample standard deviation over trials.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// The mean is accumulated around the first value, so a constant
    /// sample yields exactly that constant.
    pub fn of(values: &[f64]) -> Self {
        let Some(&pivot) = values.first() else {
            return Self::default();
        };
        let n = values.len() as f64;
        let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Trial statistics at one recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub rms_dist: Stat,
    pub mean_dist: Stat,
    pub consensus_err: Stat,
    pub scaled_dist: Stat,
    pub scaled_consensus: Stat,
    pub num_clipped: Stat,
    pub n_trials: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregateSeries {
    pub rows: Vec<AggregateRow>,
}

impl AggregateSeries {
    pub fn at(&self, t: u64) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.t == t)
    }
}

/// Per-trial trajectories tagged with their trial index.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub records: Vec<MetricsRecord>,
}

/// Reduces trials step by step. Input order does not matter: trials are
/// reduced in trial-index order.
pub fn aggregate(trials: &[TrialResult]) -> Result<AggregateSeries, HarnessError> {
    let mut sorted: Vec<&TrialResult> = trials.iter().collect();
    sorted.sort_by_key(|r| r.trial);
    let Some(first) = sorted.first() else {
        return Ok(AggregateSeries::default());
    };
    let len = first.records.len();
    for tr in &sorted {
        if tr.records.len() != len {
            return Err(HarnessError::Misaligned(format!(
                "trial {} has {} records, trial {} has {len}",
                tr.trial,
                tr.records.len(),
                first.trial
            )));
        }
    }
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let t = first.records[i].t;
        if let Some(tr) = sorted.iter().find(|tr| tr.records[i].t != t) {
            return Err(HarnessError::Misaligned(format!(
                "record {i} is t={} in trial {} but t={t} in trial {}",
                tr.records[i].t, tr.trial, first.trial
            )));
        }
        let column = |f: fn(&MetricsRecord) -> f64| -> Stat {
            let vals: Vec<f64> = sorted.iter().map(|tr| f(&tr.records[i])).collect();
            Stat::of(&vals)
        };
        rows.push(AggregateRow {
            t,
            rms_dist: column(|r| r.rms_dist),
            mean_dist: column(|r| r.mean_dist),
            consensus_err: column(|r| r.consensus_err),
            scaled_dist: column(|r| r.scaled_dist),
            scaled_consensus: column(|r| r.scaled_consensus),
            num_clipped: column(|r| r.num_clipped as f64),
            n_trials: sorted.len() as u64,
        });
    }
    Ok(AggregateSeries { rows })
}

/// Runs trials `0..n_trials` concurrently; trial `i` uses `seeds.trial(i)`.
pub fn run_trials(
    setup: &SimulationSetup,
    t_max: u64,
    n_trials: u64,
    seeds: SeedTree,
) -> Result<Vec<TrialResult>, HarnessError> {
    (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            dmed::run(setup, t_max, &seeds.trial(trial))
                .map(|records| TrialResult { trial, records })
                .map_err(|source| HarnessError::Trial { trial, source })
        })
        .collect()
}

/// Builds the graph, runs every trial and aggregates.
pub fn run_experiment(
    config: &ExperimentConfig,
    base_dir: Option<&Path>,
) -> Result<AggregateSeries, HarnessError> {
    let setup = config.setup(base_dir)?;
    let trials = run_trials(&setup, config.run.t_max, config.run.n_trials, config.seeds())?;
    aggregate(&trials)
}

/// Row of the averaging-recursion experiment: statistics of
/// `(t+1)^(delta0 - eps0) z_t^2` over trials.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursionRow {
    pub t: u64,
    pub scaled_median: f64,
    pub scaled_mean: f64,
    pub n_trials: u64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs the scalar averaging recursion over `n_trials` seeds and reports
/// the scaled squared error at `t = 0, record_every, ...` and at `t_max`.
pub fn run_recursion_experiment(
    params: &RecursionParams,
    eps0: f64,
    t_max: u64,
    n_trials: u64,
    record_every: u64,
    seeds: SeedTree,
) -> Result<Vec<RecursionRow>, HarnessError> {
    params.validate()?;
    if record_every == 0 || n_trials == 0 {
        return Err(HarnessError::Config(
            "record_every and trials must be at least 1".into(),
        ));
    }
    let delta0 = params.delta0();
    if !(eps0 > 0.0 && eps0 < delta0) {
        return Err(HarnessError::Config(format!(
            "eps0 must lie in (0, delta0 = {delta0}), got {eps0}"
        )));
    }
    let exponent = delta0 - eps0;
    let grid: Vec<u64> = (0..=t_max)
        .filter(|t| t % record_every == 0 || *t == t_max)
        .collect();
    let per_trial: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeds.trial(trial).stream(Purpose::Recursion, 0, 0);
            let z = lemma1_recursion(params, t_max, &mut rng)?;
            Ok(grid
                .iter()
                .map(|&t| ((t + 1) as f64).powf(exponent) * z[t as usize].powi(2))
                .collect())
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut col: Vec<f64> = per_trial.iter().map(|v| v[i]).collect();
            let scaled_mean = Stat::of(&col).mean;
            RecursionRow {
                t,
                scaled_median: median(&mut col),
                scaled_mean,
                n_trials,
            }
        })
        .collect())
}
