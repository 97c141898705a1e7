//! Parallel parameter sweeps over independent engine runs.
//!
//! Results always come back in input order regardless of which worker
//! finishes first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{g2_hh, irf_convolve, CorrelationCurve, CorrelationKind, DetectionParams, SourceParams};
use crate::elements::LoopParams;
use crate::engine::{run_loop, EngineConfig};
use crate::error::{Error, Result};

/// Environment variable consulted when no worker count is given explicitly.
pub const WORKERS_ENV: &str = "DELAYLOOP_WORKERS";

/// Explicit value, then `DELAYLOOP_WORKERS`, then the available cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return if n == 0 { Err(Error::invalid("worker count must be at least 1")) } else { Ok(n) };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::invalid(format!("{WORKERS_ENV}='{v}' is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `items` on a dedicated pool of `workers` threads.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Divides out the blinking bunching of the emitter, 1 + a.
pub fn dark_state_corrected(g2: f64, source: &SourceParams) -> f64 {
    g2 / (1.0 + source.a)
}

/// g²_HH(0) as a detector with finite jitter would record it: the loop
/// correlation curve with central value `raw` is convolved with the IRF,
/// read at τ = 0, then dark-state corrected.
pub fn convolved_g2_zero(raw: f64, source: &SourceParams, lp: &LoopParams, d: &DetectionParams) -> Result<f64> {
    if d.irf_fwhm == 0.0 {
        return Ok(dark_state_corrected(raw, source));
    }
    let half = 5.0 * d.irf_fwhm + 1.0;
    let step = d.irf_fwhm / 20.0;
    let n = (half / step).ceil();
    let curve =
        CorrelationCurve::sample(-n * step, n * step, step, CorrelationKind::HH, |t| g2_hh(t, source, lp, raw));
    let conv = irf_convolve(&curve, d)?;
    Ok(dark_state_corrected(conv.value_at(0.0), source))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub overlap: f64,
    pub g2_raw: f64,
    pub g2_corrected: f64,
    pub g2_convolved: f64,
    pub nbar: f64,
    pub dropped_weight: f64,
    pub converged: bool,
}

impl SweepRow {
    pub const HEADERS: [&'static str; 7] =
        ["overlap_M", "g2_raw", "g2_corrected", "g2_convolved", "nbar_photons", "dropped_weight", "converged"];

    pub fn as_row(&self) -> Vec<f64> {
        vec![
            self.overlap,
            self.g2_raw,
            self.g2_corrected,
            self.g2_convolved,
            self.nbar,
            self.dropped_weight,
            if self.converged { 1.0 } else { 0.0 },
        ]
    }
}

/// One engine run per overlap value.
pub fn sweep_g2_vs_m(
    engine: &EngineConfig,
    source: &SourceParams,
    detection: &DetectionParams,
    overlaps: &[f64],
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if overlaps.is_empty() {
        return Err(Error::invalid("sweep axis is empty"));
    }
    source.validate()?;
    detection.validate()?;
    let rows = parallel_map(overlaps, workers, |&m| -> Result<SweepRow> {
        let cfg = EngineConfig { loop_params: engine.loop_params.with_overlap(m), ..*engine };
        let rep = run_loop(&cfg)?;
        Ok(SweepRow {
            overlap: m,
            g2_raw: rep.g2_zero,
            g2_corrected: dark_state_corrected(rep.g2_zero, source),
            g2_convolved: convolved_g2_zero(rep.g2_zero, source, &cfg.loop_params, detection)?,
            nbar: rep.nbar,
            dropped_weight: rep.dropped_weight,
            converged: rep.converged,
        })
    })?;
    rows.into_iter().collect()
}
