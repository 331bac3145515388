//! CSV emission and parsing of aggregate series.

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::experiment::{AggregateSeries, RecursionRow};
use super::HarnessError;

pub const SERIES_HEADER: [&str; 9] = [
    "t",
    "rms_dist_mean",
    "rms_dist_std",
    "mean_dist_mean",
    "consensus_err_mean",
    "scaled_dist_mean",
    "scaled_consensus_mean",
    "num_clipped_mean",
    "n_trials",
];

pub const RECURSION_HEADER: [&str; 4] = ["t", "scaled_median", "scaled_mean", "n_trials"];

/// The columns of one emitted series row.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SeriesRow {
    pub t: u64,
    pub rms_dist_mean: f64,
    pub rms_dist_std: f64,
    pub mean_dist_mean: f64,
    pub consensus_err_mean: f64,
    pub scaled_dist_mean: f64,
    pub scaled_consensus_mean: f64,
    pub num_clipped_mean: f64,
    pub n_trials: u64,
}

impl AggregateSeries {
    pub fn csv_rows(&self) -> Vec<SeriesRow> {
        self.rows
            .iter()
            .map(|r| SeriesRow {
                t: r.t,
                rms_dist_mean: r.rms_dist.mean,
                rms_dist_std: r.rms_dist.std,
                mean_dist_mean: r.mean_dist.mean,
                consensus_err_mean: r.consensus_err.mean,
                scaled_dist_mean: r.scaled_dist.mean,
                scaled_consensus_mean: r.scaled_consensus.mean,
                num_clipped_mean: r.num_clipped.mean,
                n_trials: r.n_trials,
            })
            .collect()
    }
}

/// 17 significant digits: enough to reproduce every `f64` exactly.
fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Csv(e.to_string())
}

pub fn write_series<W: Write>(series: &AggregateSeries, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER).map_err(csv_err)?;
    for r in series.csv_rows() {
        w.write_record([
            r.t.to_string(),
            fmt_real(r.rms_dist_mean),
            fmt_real(r.rms_dist_std),
            fmt_real(r.mean_dist_mean),
            fmt_real(r.consensus_err_mean),
            fmt_real(r.scaled_dist_mean),
            fmt_real(r.scaled_consensus_mean),
            fmt_real(r.num_clipped_mean),
            r.n_trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::Csv(source.to_string()))
}

pub fn series_to_string(series: &AggregateSeries) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_series(series, &mut buf)?;
    String::from_utf8(buf).map_err(|e| HarnessError::Csv(e.to_string()))
}

/// Writes `series` to `path`.
pub fn emit_csv(series: &AggregateSeries, path: &Path) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_series(series, std::io::BufWriter::new(file)).map_err(|e| match e {
        HarnessError::Csv(msg) => HarnessError::Csv(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_series<R: Read>(input: R) -> Result<Vec<SeriesRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(SERIES_HEADER.iter().copied()) {
        return Err(HarnessError::Csv(format!(
            "unexpected header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_recursion<W: Write>(rows: &[RecursionRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECURSION_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_real(r.scaled_median),
            fmt_real(r.scaled_mean),
            r.n_trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::Csv(source.to_string()))
}

pub fn emit_recursion_csv(rows: &[RecursionRow], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_recursion(rows, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{AggregateRow, Stat};

    fn row(t: u64, base: f64) -> AggregateRow {
        let s = |k: f64| Stat {
            mean: base * k,
            std: base / (k + 3.0),
        };
        AggregateRow {
            t,
            rms_dist: s(1.0),
            mean_dist: s(0.1),
            consensus_err: s(std::f64::consts::PI),
            scaled_dist: s(1e-300),
            scaled_consensus: s(1e300),
            num_clipped: s(0.5),
            n_trials: 7,
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        let text = series_to_string(&AggregateSeries::default()).unwrap();
        assert_eq!(text, format!("{}\n", SERIES_HEADER.join(",")));
        assert!(parse_series(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_exact() {
        let s = AggregateSeries {
            rows: vec![row(0, 1.0 / 3.0), row(10, 2.0f64.sqrt()), row(20, 0.0)],
        };
        let text = series_to_string(&s).unwrap();
        assert_eq!(parse_series(text.as_bytes()).unwrap(), s.csv_rows());
        // every real has at least 12 significant digits
        let first_data = text.lines().nth(1).unwrap();
        let mantissa = first_data.split(',').nth(1).unwrap().split('e').next().unwrap();
        assert!(mantissa.chars().filter(char::is_ascii_digit).count() >= 12);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(parse_series("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let err = emit_csv(&AggregateSeries::default(), Path::new("/nonexistent/dir/out.csv"))
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"), "{err}");
    }
}
