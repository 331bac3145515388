//! Decaying gains and clipping threshold, with admissibility checks.

use std::fmt;

use thiserror::Error;

/// Tolerance when checking that `mu` equals `1 - eps_bar`.
const MU_MATCH_TOL: f64 = 1e-12;

/// Raw schedule parameters. Use [`ScheduleParams::validate`] or
/// [`ScheduleParams::into_schedule`] before driving an update with them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams {
    pub alpha0: f64,
    pub tau1: f64,
    pub beta0: f64,
    pub tau2: f64,
    pub gamma0: f64,
    pub tau3: f64,
    pub c_mu: f64,
    pub mu: f64,
    /// Bias decay exponent of the observation model.
    pub delta: f64,
    /// Only consulted when `delta >= 1`.
    pub eps_bar: f64,
}

pub const DEFAULT_EPS_BAR: f64 = 0.1;

impl Default for ScheduleParams {
    /// `alpha_t = (t+1)^-0.6`, `beta_t = (t+1)^-0.2 / 10`,
    /// `gamma_t = 20 (t+1)^-0.3`, `c_mu = 10`, `mu = 0.9`, `delta = 1`.
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            tau1: 0.6,
            beta0: 0.1,
            tau2: 0.2,
            gamma0: 20.0,
            tau3: 0.3,
            c_mu: 10.0,
            mu: 0.9,
            delta: 1.0,
            eps_bar: DEFAULT_EPS_BAR,
        }
    }
}

/// One failed admissibility constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositive { name: &'static str, value: f64 },
    Tau2NotPositive { tau2: f64 },
    Tau2NotBelowTau1 { tau1: f64, tau2: f64 },
    Tau1NotBelowOne { tau1: f64 },
    MuOutOfRange { mu: f64 },
    EpsBarOutOfRange { eps_bar: f64 },
    MuNotDelta0 { mu: f64, delta0: f64 },
    MuBelowDelta { mu: f64, delta: f64 },
    Tau3NotPositive { tau3: f64 },
    Tau3TooLarge { tau3: f64, tau1: f64, delta0: f64, bound: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NonPositive { name, value } => write!(f, "{name} > 0 fails ({name}={value})"),
            Violation::Tau2NotPositive { tau2 } => write!(f, "τ2 > 0 fails (τ2={tau2})"),
            Violation::Tau2NotBelowTau1 { tau1, tau2 } => {
                write!(f, "τ2 < τ1 fails (τ2={tau2}, τ1={tau1})")
            }
            Violation::Tau1NotBelowOne { tau1 } => write!(f, "τ1 < 1 fails (τ1={tau1})"),
            Violation::MuOutOfRange { mu } => write!(f, "0 < μ < 1 fails (μ={mu})"),
            Violation::EpsBarOutOfRange { eps_bar } => {
                write!(f, "0 < ε̄ < 1 fails (ε̄={eps_bar})")
            }
            Violation::MuNotDelta0 { mu, delta0 } => {
                write!(f, "μ = δ0 = 1 - ε̄ fails for δ >= 1 (μ={mu}, δ0={delta0})")
            }
            Violation::MuBelowDelta { mu, delta } => {
                write!(f, "δ <= μ fails for δ < 1 (μ={mu}, δ={delta})")
            }
            Violation::Tau3NotPositive { tau3 } => write!(f, "τ3 > 0 fails (τ3={tau3})"),
            Violation::Tau3TooLarge {
                tau3,
                tau1,
                delta0,
                bound,
            } => write!(
                f,
                "τ3 < min{{1 - τ1, 0.5 δ0}} fails (τ3={tau3}, τ1={tau1}, δ0={delta0}, bound={bound})"
            ),
        }
    }
}

/// Every constraint a parameter set failed; never empty.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("inadmissible schedule: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidSchedule(pub Vec<Violation>);

impl ScheduleParams {
    /// Rate exponent of the averaging error: `1 - eps_bar` when `delta >= 1`,
    /// `delta` otherwise.
    pub fn delta0(&self) -> f64 {
        if self.delta >= 1.0 {
            1.0 - self.eps_bar
        } else {
            self.delta
        }
    }

    /// Supremum allowed for `tau3`: `min(1 - tau1, delta0 / 2)`.
    pub fn tau3_bound(&self) -> f64 {
        (1.0 - self.tau1).min(0.5 * self.delta0())
    }

    /// All violated constraints. Comparisons are phrased so that NaN fails.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, value) in [
            ("α0", self.alpha0),
            ("β0", self.beta0),
            ("γ0", self.gamma0),
            ("c_μ", self.c_mu),
            ("δ", self.delta),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(Violation::NonPositive { name, value });
            }
        }
        if !(self.tau2 > 0.0) {
            v.push(Violation::Tau2NotPositive { tau2: self.tau2 });
        }
        if !(self.tau2 < self.tau1) {
            v.push(Violation::Tau2NotBelowTau1 {
                tau1: self.tau1,
                tau2: self.tau2,
            });
        }
        if !(self.tau1 < 1.0) {
            v.push(Violation::Tau1NotBelowOne { tau1: self.tau1 });
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            v.push(Violation::MuOutOfRange { mu: self.mu });
        }
        if self.delta >= 1.0 {
            if !(self.eps_bar > 0.0 && self.eps_bar < 1.0) {
                v.push(Violation::EpsBarOutOfRange {
                    eps_bar: self.eps_bar,
                });
            }
            let delta0 = self.delta0();
            if !((self.mu - delta0).abs() <= MU_MATCH_TOL) {
                v.push(Violation::MuNotDelta0 {
                    mu: self.mu,
                    delta0,
                });
            }
        } else if !(self.delta <= self.mu) {
            v.push(Violation::MuBelowDelta {
                mu: self.mu,
                delta: self.delta,
            });
        }
        if !(self.tau3 > 0.0) {
            v.push(Violation::Tau3NotPositive { tau3: self.tau3 });
        }
        let bound = self.tau3_bound();
        if !(self.tau3 < bound) {
            v.push(Violation::Tau3TooLarge {
                tau3: self.tau3,
                tau1: self.tau1,
                delta0: self.delta0(),
                bound,
            });
        }
        v
    }

    pub fn validate(&self) -> Result<(), InvalidSchedule> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(InvalidSchedule(v))
        }
    }

    pub fn into_schedule(self) -> Result<Schedule, InvalidSchedule> {
        self.validate()?;
        Ok(Schedule(self))
    }
}

/// A parameter set that passed validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule(ScheduleParams);

impl Schedule {
    pub fn params(&self) -> &ScheduleParams {
        &self.0
    }

    /// Innovation gain `alpha0 / (t+1)^tau1`.
    pub fn alpha(&self, t: u64) -> f64 {
        alpha(&self.0, t)
    }

    /// Consensus gain `beta0 / (t+1)^tau2`.
    pub fn beta(&self, t: u64) -> f64 {
        beta(&self.0, t)
    }

    /// Clipping threshold `gamma0 / (t+1)^tau3`.
    pub fn gamma(&self, t: u64) -> f64 {
        gamma(&self.0, t)
    }
}

fn power_decay(scale: f64, exponent: f64, t: u64) -> f64 {
    scale / ((t + 1) as f64).powf(exponent)
}

pub fn alpha(p: &ScheduleParams, t: u64) -> f64 {
    power_decay(p.alpha0, p.tau1, t)
}

pub fn beta(p: &ScheduleParams, t: u64) -> f64 {
    power_decay(p.beta0, p.tau2, t)
}

pub fn gamma(p: &ScheduleParams, t: u64) -> f64 {
    power_decay(p.gamma0, p.tau3, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_defaults_are_admissible() {
        let p = ScheduleParams::default();
        assert_eq!(p.validate(), Ok(()));
        assert!((p.delta0() - 0.9).abs() < 1e-15);
        assert!((p.tau3_bound() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn faster_rate_example_is_admissible() {
        let p = ScheduleParams {
            tau1: 0.5,
            tau2: 0.3,
            tau3: 0.4,
            ..ScheduleParams::default()
        };
        assert_eq!(p.validate(), Ok(()));
    }

    #[test]
    fn tau2_above_tau1_is_named() {
        let p = ScheduleParams {
            tau1: 0.6,
            tau2: 0.7,
            ..ScheduleParams::default()
        };
        let err = p.validate().unwrap_err();
        assert_eq!(
            err.0,
            vec![Violation::Tau2NotBelowTau1 {
                tau1: 0.6,
                tau2: 0.7
            }]
        );
        assert!(err.to_string().contains("τ2 < τ1 fails"));
    }

    #[test]
    fn tau3_bound_violation() {
        let p = ScheduleParams {
            tau3: 0.5,
            ..ScheduleParams::default()
        };
        let v = p.violations();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Tau3TooLarge { .. }));
        assert!(v[0].to_string().contains("min{1 - τ1, 0.5 δ0}"));
    }

    #[test]
    fn small_delta_branch() {
        let mut p = ScheduleParams {
            delta: 0.5,
            mu: 0.7,
            tau3: 0.2,
            ..ScheduleParams::default()
        };
        assert_eq!(p.delta0(), 0.5);
        assert_eq!(p.validate(), Ok(()));
        p.mu = 0.4;
        assert_eq!(
            p.violations(),
            vec![Violation::MuBelowDelta { mu: 0.4, delta: 0.5 }]
        );
    }

    #[test]
    fn nan_is_rejected_without_panicking() {
        let p = ScheduleParams {
            alpha0: f64::NAN,
            tau3: f64::NAN,
            ..ScheduleParams::default()
        };
        let v = p.violations();
        assert!(v.len() >= 3, "{v:?}");
    }

    #[test]
    fn closed_form_values() {
        let p = ScheduleParams::default();
        assert_eq!(alpha(&p, 0), 1.0);
        assert_eq!(beta(&p, 0), 0.1);
        // 20 / 1000^0.3 = 20 / 10^0.9, evaluated at 30 digits
        let g = gamma(&p, 999);
        assert!((g - 2.517_850_823_588_334_4).abs() < 1e-12, "{g}");
        let s = p.into_schedule().unwrap();
        for t in 0..1000 {
            assert!(s.alpha(t + 1) < s.alpha(t));
            assert!(s.beta(t + 1) < s.beta(t));
            assert!(s.gamma(t + 1) < s.gamma(t));
            assert!(s.gamma(t) > 0.0);
        }
    }

    fn partial_sums(s: &Schedule, t_max: u64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut at_1e3 = 0.0;
        for t in 0..t_max {
            sum += s.alpha(t) * s.gamma(t);
            if t + 1 == 1000 {
                at_1e3 = sum;
            }
        }
        (at_1e3, sum)
    }

    #[test]
    fn alpha_gamma_partial_sums_diverge() {
        // sum_{k=1}^T k^-s >= ((T+1)^(1-s) - 1) / (1-s) for s = tau1 + tau3 < 1
        let p = ScheduleParams::default();
        let s = p.into_schedule().unwrap();
        let (at_1e3, at_1e6) = partial_sums(&s, 1_000_000);
        let e = 1.0 - p.tau1 - p.tau3;
        let lower = |t: f64| p.alpha0 * p.gamma0 * ((t + 1.0).powf(e) - 1.0) / e;
        assert!(at_1e3 >= lower(1e3));
        assert!(at_1e6 >= lower(1e6));
        assert!(at_1e6 > 2.5 * at_1e3);

        // with a larger gap 1 - tau1 - tau3 the growth clears a factor of ten
        let p = ScheduleParams {
            tau1: 0.3,
            tau2: 0.1,
            tau3: 0.1,
            ..ScheduleParams::default()
        };
        let s = p.into_schedule().unwrap();
        let (at_1e3, at_1e6) = partial_sums(&s, 1_000_000);
        assert!(at_1e6 > 10.0 * at_1e3);
    }
}
