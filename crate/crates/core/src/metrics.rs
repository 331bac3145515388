//! Median set, distances to it, consensus error and rate-scaled diagnostics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no values given")]
    Empty,
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("values must be pairwise distinct; {0} appears more than once")]
    Duplicate(f64),
}

/// Set of medians of a finite set of distinct reals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MedianSet {
    /// Odd count: the middle order statistic.
    Point(f64),
    /// Even count: the closed interval between the two middle order statistics.
    Interval { lo: f64, hi: f64 },
}

impl MedianSet {
    pub fn lo(&self) -> f64 {
        match *self {
            MedianSet::Point(v) => v,
            MedianSet::Interval { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            MedianSet::Point(v) => v,
            MedianSet::Interval { hi, .. } => hi,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }
}

fn sorted_checked(theta: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if theta.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&v) = theta.iter().find(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(v));
    }
    let mut sorted = theta.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(MetricsError::Duplicate(w[0]));
    }
    Ok(sorted)
}

pub fn median_set(theta: &[f64]) -> Result<MedianSet, MetricsError> {
    let sorted = sorted_checked(theta)?;
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        MedianSet::Point(sorted[n / 2])
    } else {
        MedianSet::Interval {
            lo: sorted[n / 2 - 1],
            hi: sorted[n / 2],
        }
    })
}

/// `min_{v in set} |x - v|`.
pub fn dist_to_set(x: f64, m: &MedianSet) -> f64 {
    if x < m.lo() {
        m.lo() - x
    } else if x > m.hi() {
        x - m.hi()
    } else {
        0.0
    }
}

/// Smallest gap between distinct values; infinite for a single value.
pub fn d_min(theta: &[f64]) -> Result<f64, MetricsError> {
    let sorted = sorted_checked(theta)?;
    Ok(sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `||x - P_N x||_2` where `P_N x` replaces every entry by the mean.
pub fn consensus_error(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt()
}

/// `N^-1 sqrt(sum_n dist^2(x_n, set))`, the network average distance.
pub fn rms_dist(x: &[f64], m: &MedianSet) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let ss: f64 = x.iter().map(|&v| dist_to_set(v, m).powi(2)).sum();
    ss.sqrt() / x.len() as f64
}

/// Exponents used to scale distances into rate diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateExponents {
    /// Multiplies the distance to the median set.
    pub distance: f64,
    /// Multiplies the consensus error.
    pub consensus: f64,
}

impl RateExponents {
    /// `distance = tau3`, `consensus = tau1 - tau2 + tau3 - eps1`.
    pub fn new(tau1: f64, tau2: f64, tau3: f64, eps1: f64) -> Self {
        Self {
            distance: tau3,
            consensus: tau1 - tau2 + tau3 - eps1,
        }
    }
}

/// Diagnostics for the network state at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub t: u64,
    pub rms_dist: f64,
    pub mean_dist: f64,
    pub consensus_err: f64,
    pub scaled_dist: f64,
    pub scaled_consensus: f64,
    pub num_clipped: usize,
}

impl MetricsRecord {
    pub fn compute(
        t: u64,
        x: &[f64],
        median: &MedianSet,
        rates: &RateExponents,
        num_clipped: usize,
    ) -> Self {
        let rms = rms_dist(x, median);
        let cons = consensus_error(x);
        let tp1 = (t + 1) as f64;
        Self {
            t,
            rms_dist: rms,
            mean_dist: dist_to_set(mean(x), median),
            consensus_err: cons,
            scaled_dist: tp1.powf(rates.distance) * rms,
            scaled_consensus: tp1.powf(rates.consensus) * cons,
            num_clipped,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.rms_dist,
            self.mean_dist,
            self.consensus_err,
            self.scaled_dist,
            self.scaled_consensus,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_sets() {
        let theta: Vec<f64> = (1..=40).map(f64::from).collect();
        assert_eq!(
            median_set(&theta).unwrap(),
            MedianSet::Interval { lo: 20.0, hi: 21.0 }
        );
        assert_eq!(median_set(&[3.0, 1.0, 2.0]).unwrap(), MedianSet::Point(2.0));
        assert_eq!(
            median_set(&[1.0, 2.0]).unwrap(),
            MedianSet::Interval { lo: 1.0, hi: 2.0 }
        );
        assert_eq!(median_set(&[4.0]).unwrap(), MedianSet::Point(4.0));
        assert_eq!(median_set(&[1.0, 1.0]), Err(MetricsError::Duplicate(1.0)));
        assert_eq!(median_set(&[]), Err(MetricsError::Empty));
        assert!(matches!(
            median_set(&[f64::NAN, 1.0]),
            Err(MetricsError::NonFinite(_))
        ));
    }

    #[test]
    fn distances() {
        let iv = MedianSet::Interval { lo: 20.0, hi: 21.0 };
        assert_eq!(dist_to_set(20.5, &iv), 0.0);
        assert_eq!(dist_to_set(19.0, &iv), 1.0);
        assert_eq!(dist_to_set(23.0, &iv), 2.0);
        assert_eq!(dist_to_set(2.0, &MedianSet::Point(2.0)), 0.0);
    }

    #[test]
    fn gaps() {
        let theta: Vec<f64> = (1..=40).map(f64::from).collect();
        assert_eq!(d_min(&theta).unwrap(), 1.0);
        assert_eq!(d_min(&[0.0, 0.5, 10.0]).unwrap(), 0.5);
        assert_eq!(d_min(&[1.0, 1.0]), Err(MetricsError::Duplicate(1.0)));
    }

    #[test]
    fn consensus_errors() {
        assert_eq!(consensus_error(&[2.5; 7]), 0.0);
        assert!((consensus_error(&[1.0, -1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rms_uses_one_over_n() {
        // two agents each at distance 1: N^-1 sqrt(2)
        let m = MedianSet::Point(0.0);
        assert!((rms_dist(&[1.0, -1.0], &m) - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn record_scaling() {
        let m = MedianSet::Point(0.0);
        let rates = RateExponents::new(0.6, 0.2, 0.3, 0.2);
        let r = MetricsRecord::compute(999, &[1.0, 3.0], &m, &rates, 1);
        assert!((r.scaled_dist - 1000f64.powf(0.3) * r.rms_dist).abs() < 1e-12);
        assert!((r.scaled_consensus - 1000f64.powf(0.5) * r.consensus_err).abs() < 1e-12);
        assert_eq!(r.mean_dist, 2.0);
        assert!(r.is_valid());
    }
}
