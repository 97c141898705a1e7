//! Coincidence histograms and their normalization to g²(τ).
//!
//! Input files are CSV with two or three columns: `tau_ns, counts[, baseline]`.
//! A header row is optional and detected by a non-numeric first field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlations::{CorrelationCurve, CorrelationKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub tau_bins: Vec<f64>,
    pub counts: Vec<u64>,
    /// Raw coincidences corresponding to g² = 1.
    pub baseline_counts: f64,
}

impl Histogram {
    pub fn new(tau_bins: Vec<f64>, counts: Vec<u64>, baseline_counts: f64) -> Result<Self> {
        if tau_bins.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: tau_bins.len(), got: counts.len() });
        }
        if tau_bins.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("histogram bins must be strictly increasing"));
        }
        Ok(Histogram { tau_bins, counts, baseline_counts })
    }

    /// Mean count of the outer `fraction` of bins on each side.
    pub fn wing_baseline(&self, fraction: f64) -> f64 {
        let n = self.counts.len();
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.div_ceil(2).max(1));
        let wings = self.counts[..k].iter().chain(&self.counts[n - k..]);
        wings.map(|&c| c as f64).sum::<f64>() / (2 * k) as f64
    }

    /// Reads a histogram file. `baseline` overrides the third column; if
    /// neither is present the outer 10 % of bins set the baseline.
    pub fn read_csv(path: &Path, baseline: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut taus = Vec::new();
        let mut counts = Vec::new();
        let mut column = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            if rec.len() < 2 || rec.len() > 3 {
                return Err(Error::parse(path, format!("line {}: expected 2 or 3 columns, found {}", i + 1, rec.len())));
            }
            let tau: f64 = match rec[0].parse() {
                Ok(t) => t,
                Err(_) if i == 0 => continue,
                Err(_) => return Err(Error::parse(path, format!("line {}: bad delay '{}'", i + 1, &rec[0]))),
            };
            let c: u64 = rec[1]
                .parse()
                .map_err(|_| Error::parse(path, format!("line {}: counts must be a non-negative integer", i + 1)))?;
            if rec.len() == 3 && column.is_none() {
                let b: f64 =
                    rec[2].parse().map_err(|_| Error::parse(path, format!("line {}: bad baseline", i + 1)))?;
                column = Some(b);
            }
            taus.push(tau);
            counts.push(c);
        }
        if taus.is_empty() {
            return Err(Error::parse(path, "no histogram rows"));
        }
        let mut h = Histogram::new(taus, counts, 0.0)?;
        h.baseline_counts = baseline.or(column).unwrap_or_else(|| h.wing_baseline(0.1));
        Ok(h)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e)
    }
}

/// g²(τ) = counts / baseline.
pub fn normalize_histogram(h: &Histogram, kind: CorrelationKind) -> Result<CorrelationCurve> {
    if !(h.baseline_counts > 0.0) {
        return Err(Error::ZeroBaseline(h.baseline_counts));
    }
    let c = CorrelationCurve::new(
        h.tau_bins.clone(),
        h.counts.iter().map(|&c| c as f64 / h.baseline_counts).collect(),
        kind,
    )?;
    if c.len() > 1 && c.uniform_step().is_none() {
        return Err(Error::NonUniformGrid);
    }
    Ok(c)
}
