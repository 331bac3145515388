//! Noisy local observations with decaying bias, the recursive local average
//! each agent keeps of them, and an empirical driver for the scalar
//! averaging recursion that bounds the averaging error.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricsError};
use crate::rng::{Purpose, TrialSeed};

#[derive(Debug, Error)]
pub enum ObservationError {
    #[error(transparent)]
    Values(#[from] MetricsError),
    #[error("bias decay exponent must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("bias scale must be finite and nonnegative, got {0}")]
    InvalidBiasScale(f64),
    #[error("noise standard deviation must be finite and nonnegative, got {0}")]
    InvalidSigma(f64),
    #[error("agent index {index} out of range for {n_agents} agents")]
    AgentOutOfRange { index: usize, n_agents: usize },
    #[error("bias {value} for agent {agent} at t={t} exceeds bound {bound}")]
    BiasBoundViolated {
        agent: usize,
        t: u64,
        value: f64,
        bound: f64,
    },
    #[error("averaging gain c_mu must be positive, got {0}")]
    InvalidGain(f64),
    #[error("averaging exponent mu must lie in (0, 1), got {0}")]
    InvalidMu(f64),
    #[error("expected {expected} observations, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("recursion parameter {name} = {value} is not admissible")]
    InvalidRecursion { name: &'static str, value: f64 },
}

/// Zero-mean noise family; `noise_sigma` is the standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Uniform,
}

impl NoiseKind {
    pub fn sample<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            NoiseKind::Uniform => {
                let u: f64 = rng.random();
                sigma * 3f64.sqrt() * (2.0 * u - 1.0)
            }
        }
    }
}

/// User bias sequence `(agent, t) -> bias`.
pub type BiasFn = Arc<dyn Fn(usize, u64) -> f64 + Send + Sync>;

/// How the decaying bias term is produced.
#[derive(Clone, Default)]
pub enum BiasKind {
    /// `+v0 (t+1)^-delta`, the largest bias the bound allows.
    #[default]
    DeterministicPowerLaw,
    /// Arbitrary sequence, checked against the bound on every draw.
    CustomBounded(BiasFn),
}

impl fmt::Debug for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasKind::DeterministicPowerLaw => f.write_str("DeterministicPowerLaw"),
            BiasKind::CustomBounded(_) => f.write_str("CustomBounded(..)"),
        }
    }
}

/// Generator for `theta_n + w_n(t) + nu_n(t)`.
#[derive(Clone, Debug)]
pub struct ObservationParams {
    theta: Vec<f64>,
    v0: f64,
    delta: f64,
    noise_sigma: f64,
    noise: NoiseKind,
    bias: BiasKind,
}

impl ObservationParams {
    pub fn new(
        theta: Vec<f64>,
        v0: f64,
        delta: f64,
        noise_sigma: f64,
    ) -> Result<Self, ObservationError> {
        metrics::d_min(&theta)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ObservationError::InvalidDelta(delta));
        }
        if !(v0 >= 0.0 && v0.is_finite()) {
            return Err(ObservationError::InvalidBiasScale(v0));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(ObservationError::InvalidSigma(noise_sigma));
        }
        Ok(Self {
            theta,
            v0,
            delta,
            noise_sigma,
            noise: NoiseKind::Gaussian,
            bias: BiasKind::DeterministicPowerLaw,
        })
    }

    pub fn with_noise(mut self, noise: NoiseKind) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_bias(mut self, bias: BiasKind) -> Self {
        self.bias = bias;
        self
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_agents(&self) -> usize {
        self.theta.len()
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    /// `v0 (t+1)^-delta`.
    pub fn bias_bound(&self, t: u64) -> f64 {
        self.v0 * ((t + 1) as f64).powf(-self.delta)
    }

    pub fn bias(&self, n: usize, t: u64) -> Result<f64, ObservationError> {
        let bound = self.bias_bound(t);
        let value = match &self.bias {
            BiasKind::DeterministicPowerLaw => bound,
            BiasKind::CustomBounded(f) => f(n, t),
        };
        if !(value.abs() <= bound) {
            return Err(ObservationError::BiasBoundViolated {
                agent: n,
                t,
                value,
                bound,
            });
        }
        Ok(value)
    }

    /// One observation of agent `n` at step `t`, drawing noise from `rng`.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        n: usize,
        t: u64,
        rng: &mut R,
    ) -> Result<f64, ObservationError> {
        let theta = *self
            .theta
            .get(n)
            .ok_or(ObservationError::AgentOutOfRange {
                index: n,
                n_agents: self.theta.len(),
            })?;
        let w = if self.noise_sigma > 0.0 {
            self.noise.sample(self.noise_sigma, rng)
        } else {
            0.0
        };
        Ok(theta + w + self.bias(n, t)?)
    }

    /// Observations of all agents at step `t`, each from its own substream.
    pub fn observe_all(&self, t: u64, seed: &TrialSeed) -> Result<Vec<f64>, ObservationError> {
        (0..self.theta.len())
            .map(|n| {
                let mut rng = seed.stream(Purpose::Noise, n as u32, t);
                self.observe(n, t, &mut rng)
            })
            .collect()
    }
}

/// Per-agent recursive weighted average of observations.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalAverageState {
    theta_bar: Vec<f64>,
    t: u64,
    c_mu: f64,
    mu: f64,
}

impl LocalAverageState {
    pub fn new(initial: Vec<f64>, c_mu: f64, mu: f64) -> Result<Self, ObservationError> {
        if !(c_mu > 0.0 && c_mu.is_finite()) {
            return Err(ObservationError::InvalidGain(c_mu));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(ObservationError::InvalidMu(mu));
        }
        Ok(Self {
            theta_bar: initial,
            t: 0,
            c_mu,
            mu,
        })
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Unclamped gain `c_mu / (t+1)^mu`.
    pub fn raw_weight(&self, t: u64) -> f64 {
        self.c_mu / ((t + 1) as f64).powf(self.mu)
    }

    /// Gain actually applied: the raw gain capped at 1.
    pub fn weight(&self, t: u64) -> f64 {
        self.raw_weight(t).min(1.0)
    }

    /// Advances `theta_bar(t) -> theta_bar(t+1)` using the observations at `t`.
    pub fn update(&mut self, observations: &[f64]) -> Result<(), ObservationError> {
        if observations.len() != self.theta_bar.len() {
            return Err(ObservationError::DimensionMismatch {
                expected: self.theta_bar.len(),
                got: observations.len(),
            });
        }
        if self.raw_weight(self.t) > 1.0 && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "local averaging gain c_mu/(t+1)^mu = {:.4} > 1 at t={}; clamping to 1",
                self.raw_weight(self.t),
                self.t
            );
        }
        let rho = self.weight(self.t);
        for (bar, &obs) in self.theta_bar.iter_mut().zip(observations) {
            *bar = if rho >= 1.0 { obs } else { *bar + rho * (obs - *bar) };
        }
        self.t += 1;
        Ok(())
    }
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Parameters of `z(t+1) = (1 - r1(t)) z(t) + r1(t) (r2(t) + w(t))` with
/// `r1(t) = min(1, a1 (t+1)^-mu)`, `r2(t) = a2 (t+1)^-delta` and
/// `w(t) ~ N(0, sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionParams {
    pub a1: f64,
    pub mu: f64,
    pub a2: f64,
    pub delta: f64,
    pub sigma: f64,
    pub z0: f64,
}

impl RecursionParams {
    pub fn validate(&self) -> Result<(), ObservationError> {
        let bad = |name, value| Err(ObservationError::InvalidRecursion { name, value });
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(ObservationError::InvalidMu(self.mu));
        }
        if !(self.a1 > 0.0 && self.a1.is_finite()) {
            return bad("a1", self.a1);
        }
        if !(self.a2 >= 0.0 && self.a2.is_finite()) {
            return bad("a2", self.a2);
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta", self.delta);
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma", self.sigma);
        }
        if !self.z0.is_finite() {
            return bad("z0", self.z0);
        }
        Ok(())
    }

    pub fn r1(&self, t: u64) -> f64 {
        (self.a1 * ((t + 1) as f64).powf(-self.mu)).min(1.0)
    }

    pub fn r2(&self, t: u64) -> f64 {
        self.a2 * ((t + 1) as f64).powf(-self.delta)
    }

    /// Exponent of the vanishing rate: `mu` when `delta >= 1` (the averaging
    /// exponent must then equal it), otherwise `delta`.
    pub fn delta0(&self) -> f64 {
        if self.delta >= 1.0 {
            self.mu
        } else {
            self.delta
        }
    }
}

/// Trajectory `z_0, ..., z_{t_max}`.
pub fn lemma1_recursion<R: Rng + ?Sized>(
    params: &RecursionParams,
    t_max: u64,
    rng: &mut R,
) -> Result<Vec<f64>, ObservationError> {
    params.validate()?;
    let mut z = params.z0;
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(z);
    for t in 0..t_max {
        let r1 = params.r1(t);
        let w = if params.sigma > 0.0 {
            NoiseKind::Gaussian.sample(params.sigma, rng)
        } else {
            0.0
        };
        z = (1.0 - r1) * z + r1 * (params.r2(t) + w);
        out.push(z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(theta: Vec<f64>, v0: f64, delta: f64, sigma: f64) -> ObservationParams {
        ObservationParams::new(theta, v0, delta, sigma).unwrap()
    }

    #[test]
    fn noiseless_static_observation() {
        let p = params(vec![5.0, 1.0], 0.0, 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in [0, 1, 100, 1_000_000] {
            assert_eq!(p.observe(0, t, &mut rng).unwrap(), 5.0);
        }
    }

    #[test]
    fn power_law_bias_is_worst_case() {
        let theta: Vec<f64> = (1..=40).map(f64::from).collect();
        let p = params(theta, 10.0, 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.observe(3, 0, &mut rng).unwrap(), 4.0 + 10.0);
        assert_eq!(p.bias(0, 9).unwrap(), 1.0);
    }

    #[test]
    fn noisy_first_step_has_right_spread() {
        // theta_n + 10 + w with w ~ N(0, 4)
        let theta: Vec<f64> = (1..=40).map(f64::from).collect();
        let p = params(theta, 10.0, 1.0, 2.0);
        let seed = TrialSeed::new(1, 0);
        let samples: Vec<f64> = (0..20_000u64)
            .map(|t| {
                let mut rng = seed.stream(Purpose::Noise, 0, t);
                p.observe(4, 0, &mut rng).unwrap() - 15.0
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 4.0 * 2.0 / (samples.len() as f64).sqrt());
        assert!((var - 4.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn gaussian_noise_mean_clt_bound() {
        let p = params(vec![0.0], 0.0, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let mean = (0..n).map(|_| p.observe(0, 7, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.004, "{mean}");
    }

    #[test]
    fn uniform_noise_has_requested_std() {
        let p = params(vec![0.0], 0.0, 1.0, 2.0).with_noise(NoiseKind::Uniform);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| p.observe(0, 0, &mut rng).unwrap()).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - 4.0).abs() < 0.05, "{var}");
        assert!(xs.iter().all(|x| x.abs() <= 2.0 * 3f64.sqrt()));
    }

    #[test]
    fn custom_bias_checked_against_bound() {
        let ok = params(vec![0.0, 1.0], 2.0, 0.5, 0.0)
            .with_bias(BiasKind::CustomBounded(Arc::new(|n, t| {
                let s = if (n as u64 + t) % 2 == 0 { 1.0 } else { -1.0 };
                s * 2.0 * ((t + 1) as f64).powf(-0.5)
            })));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 0..100 {
            for n in 0..2 {
                assert!(ok.bias(n, t).unwrap().abs() <= ok.bias_bound(t));
                let v = ok.observe(n, t, &mut rng).unwrap() - ok.theta()[n];
                assert!(v.abs() <= ok.bias_bound(t) + 1e-12);
            }
        }
        let bad = params(vec![0.0], 1.0, 1.0, 0.0)
            .with_bias(BiasKind::CustomBounded(Arc::new(|_, _| 1.5)));
        assert!(matches!(
            bad.observe(0, 0, &mut rng),
            Err(ObservationError::BiasBoundViolated { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(ObservationParams::new(vec![1.0, 1.0], 0.0, 1.0, 0.0).is_err());
        assert!(ObservationParams::new(vec![1.0], 0.0, 0.0, 0.0).is_err());
        assert!(ObservationParams::new(vec![1.0], 0.0, 1.0, -1.0).is_err());
        assert!(ObservationParams::new(vec![1.0], -1.0, 1.0, 0.0).is_err());
        let p = params(vec![1.0], 0.0, 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            p.observe(1, 0, &mut rng),
            Err(ObservationError::AgentOutOfRange { .. })
        ));
    }

    #[test]
    fn observe_all_is_reproducible() {
        let p = params(vec![1.0, 2.0, 3.0], 1.0, 1.0, 1.0);
        let seed = TrialSeed::new(4, 2);
        assert_eq!(p.observe_all(17, &seed).unwrap(), p.observe_all(17, &seed).unwrap());
        assert_ne!(p.observe_all(17, &seed).unwrap(), p.observe_all(18, &seed).unwrap());
    }

    #[test]
    fn first_update_with_unit_weight_copies_observation() {
        let mut s = LocalAverageState::new(vec![100.0, -3.0], 1.0, 0.5).unwrap();
        s.update(&[1.5, 2.5]).unwrap();
        assert_eq!(s.theta_bar(), &[1.5, 2.5]);
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn constant_observations_are_a_fixed_point() {
        let mut s = LocalAverageState::new(vec![0.0], 10.0, 0.9).unwrap();
        for _ in 0..1000 {
            s.update(&[7.25]).unwrap();
            assert_eq!(s.theta_bar(), &[7.25]);
        }
    }

    #[test]
    fn weight_is_clamped() {
        let s = LocalAverageState::new(vec![0.0], 10.0, 0.9).unwrap();
        assert_eq!(s.weight(0), 1.0);
        assert!(s.raw_weight(0) > 1.0);
        // 10 / (t+1)^0.9 drops below one once t+1 > 10^(1/0.9)
        assert!(s.weight(20) < 1.0);
        assert!(LocalAverageState::new(vec![], 0.0, 0.5).is_err());
        assert!(LocalAverageState::new(vec![], 1.0, 1.0).is_err());
        let mut s = LocalAverageState::new(vec![0.0, 0.0], 1.0, 0.5).unwrap();
        assert!(matches!(
            s.update(&[1.0]),
            Err(ObservationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn noiseless_recursion_is_the_product_formula() {
        let p = RecursionParams {
            a1: 0.5,
            mu: 0.7,
            a2: 0.0,
            delta: 1.0,
            sigma: 0.0,
            z0: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = lemma1_recursion(&p, 2000, &mut rng).unwrap();
        let mut prod = 1.0;
        for t in 0..2000u64 {
            assert!(z[t as usize + 1] < z[t as usize]);
            prod *= 1.0 - 0.5 * ((t + 1) as f64).powf(-0.7);
            assert!((z[t as usize + 1] - prod).abs() <= 1e-15);
        }
        assert!(z[2000] < 1e-3);
    }

    #[test]
    fn deterministic_comparison_bound() {
        let p = RecursionParams {
            a1: 1.0,
            mu: 0.5,
            a2: 1.0,
            delta: 2.0,
            sigma: 0.0,
            z0: 3.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = lemma1_recursion(&p, 10_000, &mut rng).unwrap();
        let mut bound = p.z0.abs();
        for t in 0..10_000u64 {
            bound += p.r1(t) * p.r2(t);
            assert!(z[t as usize + 1].abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn recursion_rejects_bad_mu() {
        let mut p = RecursionParams {
            a1: 1.0,
            mu: 1.0,
            a2: 0.0,
            delta: 1.0,
            sigma: 0.0,
            z0: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            lemma1_recursion(&p, 3, &mut rng),
            Err(ObservationError::InvalidMu(_))
        ));
        p.mu = 0.0;
        assert!(lemma1_recursion(&p, 3, &mut rng).is_err());
        p.mu = 0.5;
        assert_eq!(lemma1_recursion(&p, 3, &mut rng).unwrap().len(), 4);
    }
}
