use std::io::Write;
use std::path::Path;

use delayloop::config::{OutputFormat, RunConfig};
use delayloop::correlations::{
    g2_hh, g2_three_level, g2_vh, hh_dip, hh_zero_distinguishable, irf_convolve, two_photon_oracle, vh_dip,
    CorrelationCurve, CorrelationKind,
};
use delayloop::engine::{simulate as run_engine, PhotonBudget, StateReport, TracePoint};
use delayloop::export;
use delayloop::fit::{fit_three_level, FitResult};
use delayloop::histogram::{normalize_histogram, Histogram};
use delayloop::metrics::{
    fidelity, l1_coherence, nphoton_rates, photon_number_table, total_variation, truncation_study, wigner as wigner_grid,
    PhotonNumberRow, ReferenceState, WignerSpec,
};
use delayloop::sweep::{dark_state_corrected, resolve_workers, sweep_g2_vs_m, SweepRow};
use delayloop::{Error, Result};
use serde::Serialize;

use crate::{CorrelateArgs, FitArgs, Kind, MetricsArgs, OracleArgs, Reference, WignerArgs};

/// Writes to the configured file, or stdout.
fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output.path {
        Some(p) => export::write_text(Path::new(p), text),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io { path: "<stdout>".into(), source }),
    }
}

fn json(cfg: &RunConfig) -> bool {
    cfg.output.format == OutputFormat::Json
}

#[derive(Serialize)]
struct Simulation {
    report: StateReport,
    trace: Vec<TracePoint>,
    budget: PhotonBudget,
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let run = run_engine(&cfg.engine_config())?;
    if json(cfg) {
        let out = Simulation { report: run.report, trace: run.trace, budget: run.budget };
        return emit(cfg, &export::render_json("simulation", &out));
    }
    let rows: Vec<Vec<f64>> = run.trace.iter().map(|t| vec![t.roundtrip as f64, t.nbar, t.g2_zero]).collect();
    emit(cfg, &export::render_table_csv(&["roundtrip", "nbar_photons", "g2_zero"], &rows))
}

fn write_curve(cfg: &RunConfig, c: &CorrelationCurve) -> Result<()> {
    if json(cfg) {
        emit(cfg, &export::render_json("correlation_curve", c))
    } else {
        emit(cfg, &export::render_curve_csv(c))
    }
}

pub fn correlate(cfg: &RunConfig, args: &CorrelateArgs) -> Result<()> {
    let kind = CorrelationKind::from(args.kind);
    if let Some(path) = &args.histogram {
        let h = Histogram::read_csv(path, args.baseline)?;
        return write_curve(cfg, &normalize_histogram(&h, kind)?);
    }
    if !(args.step > 0.0) || !(args.stop > args.start) {
        return Err(Error::InvalidParameter("need step > 0 and stop > start".into()));
    }
    let (src, lp) = (&cfg.source, &cfg.loop_params);
    let g0 = args.g2_zero.unwrap_or_else(|| hh_zero_distinguishable(lp.eta_l));
    let curve = CorrelationCurve::sample(args.start, args.stop, args.step, kind, |t| match args.kind {
        Kind::Vv => g2_three_level(t, src),
        Kind::Vh => g2_vh(t, src, lp),
        Kind::Hh => g2_hh(t, src, lp, g0),
    });
    let curve = if args.convolve { irf_convolve(&curve, &cfg.detection)? } else { curve };
    write_curve(cfg, &curve)
}

#[derive(Serialize)]
struct OracleRow {
    m: u32,
    oracle: f64,
    closed_form: f64,
}

pub fn oracle(cfg: &RunConfig, args: &OracleArgs) -> Result<()> {
    let dips = two_photon_oracle(&cfg.loop_params, args.r_max, args.m_max)?;
    let eta = cfg.loop_params.eta_l;
    let (name, rows): (&str, Vec<OracleRow>) = match args.kind {
        Kind::Vh => (
            "VH",
            dips.vh.iter().enumerate().map(|(i, &v)| {
                let m = i as u32 + 1;
                OracleRow { m, oracle: v, closed_form: vh_dip(m, eta) }
            }).collect(),
        ),
        Kind::Hh => (
            "HH",
            dips.hh.iter().enumerate().map(|(m, &v)| OracleRow { m: m as u32, oracle: v, closed_form: hh_dip(m as i32, eta) }).collect(),
        ),
        Kind::Vv => return Err(Error::InvalidParameter("the oracle covers the VH and HH channels only".into())),
    };
    if json(cfg) {
        return emit(cfg, &export::render_json(&format!("oracle_{}", name.to_lowercase()), &rows));
    }
    let headers = ["m_roundtrips".to_string(), format!("g2_{name}_oracle"), format!("g2_{name}_closed_form")];
    let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![f64::from(r.m), r.oracle, r.closed_form]).collect();
    emit(cfg, &export::render_table_csv(&headers.each_ref().map(String::as_str), &table))
}

#[derive(Serialize)]
struct MetricsReport {
    nbar: f64,
    g2_zero: f64,
    g2_zero_corrected: f64,
    dropped_weight: f64,
    fidelity_coherent: f64,
    fidelity_thermal: f64,
    l1_coherence: f64,
    l1_coherence_reference: f64,
    total_variation_poisson: f64,
    /// (n_max, g²(0)) with P(n) cut at n_max.
    truncation: Vec<(usize, f64)>,
    detected_hz: f64,
    rates_hz: Vec<f64>,
    table: Vec<PhotonNumberRow>,
}

pub fn metrics(cfg: &RunConfig, args: &MetricsArgs) -> Result<()> {
    let rep = run_engine(&cfg.engine_config())?.report;
    let table = photon_number_table(&rep.pn)?;
    let dim = rep.rho.dimension();
    let coherent = ReferenceState::coherent(rep.nbar, dim - 1)?;
    let thermal = ReferenceState::thermal(rep.nbar, dim - 1)?;
    let rates = nphoton_rates(args.detected_hz, &cfg.detection, &rep.pn)?;
    let pn: Vec<f64> = table.iter().map(|r| r.p_artificial).collect();
    let cuts: Vec<usize> = (1..dim).collect();
    let report = MetricsReport {
        nbar: rep.nbar,
        g2_zero: rep.g2_zero,
        g2_zero_corrected: dark_state_corrected(rep.g2_zero, &cfg.source),
        dropped_weight: rep.dropped_weight,
        fidelity_coherent: fidelity(&rep.rho, &coherent)?,
        fidelity_thermal: fidelity(&rep.rho, &thermal)?,
        l1_coherence: l1_coherence(&rep.rho),
        l1_coherence_reference: l1_coherence(&coherent.rho),
        total_variation_poisson: total_variation(&pn, &coherent.pn()),
        truncation: truncation_study(&rep.pn, &cuts)?,
        detected_hz: args.detected_hz,
        rates_hz: rates,
        table,
    };
    if json(cfg) {
        return emit(cfg, &export::render_json("metrics", &report));
    }
    let rows: Vec<Vec<f64>> = report
        .table
        .iter()
        .zip(&report.rates_hz)
        .map(|(r, hz)| vec![r.n as f64, r.p_artificial, r.p_coherent, r.p_thermal, *hz])
        .collect();
    emit(cfg, &export::render_table_csv(&["n", "P_artificial", "P_coherent", "P_thermal", "rate_hz"], &rows))
}

/// Matrix text unless JSON is asked for; a grid has no natural CSV form.
pub fn wigner(cfg: &RunConfig, args: &WignerArgs) -> Result<()> {
    let rho = match (args.reference, args.nbar) {
        (Some(kind), Some(nbar)) => {
            let n_max = cfg.engine.n_max as usize;
            match kind {
                Reference::Coherent => ReferenceState::coherent(nbar, n_max)?.rho,
                Reference::Thermal => ReferenceState::thermal(nbar, n_max)?.rho,
            }
        }
        _ => run_engine(&cfg.engine_config())?.report.rho,
    };
    if !(args.extent > 0.0) {
        return Err(Error::InvalidParameter("extent must be positive".into()));
    }
    let spec = WignerSpec { q_range: (-args.extent, args.extent), p_range: (-args.extent, args.extent), resolution: args.resolution };
    let grid = wigner_grid(&rho, &spec)?;
    if json(cfg) {
        emit(cfg, &export::render_json("wigner_grid", &grid))
    } else {
        emit(cfg, &export::render_wigner(&grid))
    }
}

#[derive(Serialize)]
struct FitReport {
    #[serde(flatten)]
    fit: FitResult,
    std_errors: [f64; 3],
}

pub fn fit(cfg: &RunConfig, args: &FitArgs) -> Result<()> {
    let curve = match (&args.input, &args.histogram) {
        (Some(p), _) => export::parse_curve_csv(&export::read_text(p)?, p)?,
        (None, Some(p)) => normalize_histogram(&Histogram::read_csv(p, args.baseline)?, CorrelationKind::VV)?,
        (None, None) => return Err(Error::InvalidParameter("give --input or --histogram".into())),
    };
    let fit = fit_three_level(&curve, &cfg.detection, &cfg.source)?;
    let se = fit.std_errors();
    if json(cfg) {
        return emit(cfg, &export::render_json("fit", &FitReport { fit, std_errors: se }));
    }
    let p = fit.params;
    let row = vec![p.a, p.tau_r, p.tau_b, se[0], se[1], se[2], fit.residual, fit.iterations as f64];
    let headers = ["a", "tau_r_ns", "tau_b_ns", "a_err", "tau_r_err_ns", "tau_b_err_ns", "residual_ssr", "iterations"];
    emit(cfg, &export::render_table_csv(&headers, &[row]))
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let workers = resolve_workers(cfg.sweep.workers)?;
    let rows = sweep_g2_vs_m(&cfg.engine_config(), &cfg.source, &cfg.detection, &cfg.sweep.values(), workers)?;
    if json(cfg) {
        return emit(cfg, &export::render_json("sweep", &rows));
    }
    let table: Vec<Vec<f64>> = rows.iter().map(SweepRow::as_row).collect();
    emit(cfg, &export::render_table_csv(&SweepRow::HEADERS, &table))
}
