//! `delayloop`: simulate a delay-loop photon interferometer from the shell.
//!
//! Exit status is 0 on success, 1 for domain errors (bad parameters,
//! truncation overflow, failed fits) and 2 for IO or parse errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delayloop::config::{OutputFormat, RunConfig};
use delayloop::correlations::CorrelationKind;
use delayloop::Error;

#[derive(Parser)]
#[command(name = "delayloop", version, about = "Delay-loop photon statistics simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the loop engine and report the output state.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Analytic correlation curves, or a normalized histogram.
    Correlate(CorrelateArgs),
    /// Dip values from two-photon enumeration next to the closed forms.
    Oracle(OracleArgs),
    /// Photon-number table, fidelities, coherence and n-photon rates.
    Metrics(MetricsArgs),
    /// Wigner function of the output state or a reference state.
    Wigner(WignerArgs),
    /// Fit the three-level emitter model to a measured curve.
    Fit(FitArgs),
    /// g²(0) against wavepacket overlap M.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads; falls back to DELAYLOOP_WORKERS, then all cores.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        m_start: Option<f64>,
        #[arg(long)]
        m_stop: Option<f64>,
        #[arg(long)]
        m_steps: Option<usize>,
    },
}

/// Options shared by every subcommand. Flags override the config file.
#[derive(Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Round-trip transmission of the loop.
    #[arg(long)]
    eta_l: Option<f64>,
    /// Wavepacket overlap M of successive photons.
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    round_trip_ns: Option<f64>,
    #[arg(long)]
    trips: Option<usize>,
    #[arg(long)]
    n_max: Option<u32>,
    #[arg(long)]
    eps_amp: Option<f64>,
    /// Blinking amplitude of the emitter.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    tau_r: Option<f64>,
    #[arg(long)]
    tau_b: Option<f64>,
    #[arg(long)]
    irf_fwhm: Option<f64>,
    #[arg(long)]
    eta_d: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    Vv,
    Vh,
    Hh,
}

impl From<Kind> for CorrelationKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Vv => CorrelationKind::VV,
            Kind::Vh => CorrelationKind::VH,
            Kind::Hh => CorrelationKind::HH,
        }
    }
}

#[derive(Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "hh")]
    kind: Kind,
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    start: f64,
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    stop: f64,
    #[arg(long, default_value_t = 0.02)]
    step: f64,
    /// Centre value g²_HH(0); defaults to the distinguishable-photon value.
    #[arg(long)]
    g2_zero: Option<f64>,
    /// Blur with the detector response.
    #[arg(long)]
    convolve: bool,
    /// Normalize a coincidence histogram (tau_ns, counts[, baseline]) instead.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Raw counts corresponding to g² = 1.
    #[arg(long)]
    baseline: Option<f64>,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "hh")]
    kind: Kind,
    #[arg(long, default_value_t = 30)]
    r_max: u32,
    #[arg(long, default_value_t = 6)]
    m_max: u32,
}

#[derive(Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    common: Common,
    /// Detected count rate used for the n-photon rate estimate.
    #[arg(long, default_value_t = 150e3)]
    detected_hz: f64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Reference {
    Coherent,
    Thermal,
}

#[derive(Args)]
pub struct WignerArgs {
    #[command(flatten)]
    common: Common,
    /// Use a reference state of this n̄ instead of the simulated output.
    #[arg(long, value_enum, requires = "nbar")]
    reference: Option<Reference>,
    #[arg(long)]
    nbar: Option<f64>,
    /// Half-width of the square phase-space window.
    #[arg(long, default_value_t = 4.0)]
    extent: f64,
    #[arg(long, default_value_t = 161)]
    resolution: usize,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Curve file with columns tau_ns,g2_<kind>.
    #[arg(long, conflicts_with = "histogram", required_unless_present = "histogram")]
    input: Option<PathBuf>,
    /// Coincidence histogram, normalized before fitting.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<f64>,
}

impl Common {
    /// Config file (or defaults) with flag overrides applied and validated.
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.loop_params.eta_l, self.eta_l);
        set(&mut cfg.loop_params.overlap, self.overlap);
        set(&mut cfg.loop_params.round_trip_ns, self.round_trip_ns);
        set(&mut cfg.engine.eps_amp, self.eps_amp);
        set(&mut cfg.source.a, self.a);
        set(&mut cfg.source.tau_r, self.tau_r);
        set(&mut cfg.source.tau_b, self.tau_b);
        set(&mut cfg.detection.irf_fwhm, self.irf_fwhm);
        set(&mut cfg.detection.eta_d, self.eta_d);
        if let Some(t) = self.trips {
            cfg.engine.n_roundtrips = t;
        }
        if let Some(n) = self.n_max {
            cfg.engine.n_max = n;
        }
        if let Some(p) = &self.out {
            cfg.output.path = Some(p.display().to_string());
        }
        if let Some(f) = self.format {
            cfg.output.format = match f {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => common.resolve().and_then(|c| commands::simulate(&c)),
        Command::Correlate(args) => args.common.resolve().and_then(|c| commands::correlate(&c, args)),
        Command::Oracle(args) => args.common.resolve().and_then(|c| commands::oracle(&c, args)),
        Command::Metrics(args) => args.common.resolve().and_then(|c| commands::metrics(&c, args)),
        Command::Wigner(args) => args.common.resolve().and_then(|c| commands::wigner(&c, args)),
        Command::Fit(args) => args.common.resolve().and_then(|c| commands::fit(&c, args)),
        Command::Sweep { common, workers, m_start, m_stop, m_steps } => common.resolve().and_then(|mut c| {
            c.sweep.m_start = m_start.unwrap_or(c.sweep.m_start);
            c.sweep.m_stop = m_stop.unwrap_or(c.sweep.m_stop);
            c.sweep.m_steps = m_steps.unwrap_or(c.sweep.m_steps);
            c.sweep.workers = workers.or(c.sweep.workers);
            c.validate()?;
            commands::sweep(&c)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("delayloop: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
