//! Round-trip propagation of a single-photon stream through the delay loop.
//!
//! Each trip: a fresh H photon passes WP1 and its V half is discarded (a 50 %
//! loss), the loop content suffers the round-trip loss, WP2 mixes fresh and
//! looped light with overlap M, and the PBS sends H light out as the next
//! output bin while V light stays for another trip.
//!
//! Modes at the loop input carry the label of the current trip `t`. After the
//! PBS, H modes at `t` become output bin `t` and V modes are relabelled `t+1`.
//!
//! The state is a sparse density operator. Two reductions keep it small and
//! are exact for every tag-blind photon-counting observable and for the
//! single-bin density matrices:
//!
//! * entries whose ket and bra disagree on a non-reference tag are dropped.
//!   The per-tag photon-number difference between ket and bra is conserved by
//!   every later operation, so such entries never reach a readout. Emitted
//!   bins are likewise kept in the photon-number basis only, which discards
//!   cross-bin coherences but preserves joint count statistics;
//! * all non-reference loop photons are pooled on tag 1 and all output-bin
//!   photons on tag 0. Within a dephased block the pooled photons are
//!   independent, and a k-photon Fock state on a 50/50 plate splits
//!   binomially, exactly like k distinguishable photons, so pooling keeps all
//!   count statistics. The fresh photon keeps its own tag through WP2 so
//!   that it does not interfere with the pool.

use serde::{Deserialize, Serialize};

use crate::density::{g2_from_pn, mean, DensityMatrix};
use crate::elements::{diffraction_overlap, overlap_split, pbs_label, LoopParams, SignConvention, WaveplateAllTags};
use crate::error::{Error, Result};
use crate::fock::{Chain, ModeId, ModeKind, Occupation, Polarization, DEFAULT_EPS_AMP, DEFAULT_N_MAX};
use crate::mixed::MixedState;
use crate::tolerances::CONVERGENCE_TOL;

/// Tag shared by all non-reference photons in the loop.
pub const POOL_TAG: u32 = 1;
/// Tag carried by the fresh photon until it has passed WP2.
pub const FRESH_TAG: u32 = 2;

/// WP1 passes half of every source photon into the H path.
pub const WP1_TRANSMISSION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    #[serde(rename = "loop")]
    pub loop_params: LoopParams,
    pub n_roundtrips: usize,
    /// Cap on photons inside the loop.
    pub n_max: u32,
    pub eps_amp: f64,
    /// Number of most recent output bins kept coherently in the state.
    pub retained_bins: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            loop_params: LoopParams::default(),
            n_roundtrips: 20,
            n_max: DEFAULT_N_MAX,
            eps_amp: DEFAULT_EPS_AMP,
            retained_bins: 3,
        }
    }
}

impl EngineConfig {
    pub fn new(loop_params: LoopParams) -> Self {
        EngineConfig { loop_params, ..Self::default() }
    }

    pub fn with_trips(self, n_roundtrips: usize) -> Self {
        EngineConfig { n_roundtrips, ..self }
    }

    pub fn with_n_max(self, n_max: u32) -> Self {
        EngineConfig { n_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_params.validate()?;
        if self.n_roundtrips == 0 {
            return Err(Error::invalid("n_roundtrips must be at least 1"));
        }
        if self.retained_bins == 0 {
            return Err(Error::invalid("retained_bins must be at least 1"));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        if !(self.eps_amp >= 0.0) {
            return Err(Error::invalid("eps_amp must be non-negative"));
        }
        Ok(())
    }
}

/// Statistics of the most recent output bin.
///
/// `pn` is not renormalized: it sums to `1 − dropped_weight`. `rho` is the
/// same bin's state normalized to unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub pn: Vec<f64>,
    pub nbar: f64,
    pub g2_zero: f64,
    pub rho: DensityMatrix,
    pub dropped_weight: f64,
    pub converged: bool,
    pub roundtrips: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub roundtrip: usize,
    pub nbar: f64,
    pub g2_zero: f64,
}

/// Expected photon numbers, for conservation checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    /// Source photons offered (one per trip).
    pub injected: f64,
    /// Σ n̄ over every output bin.
    pub emitted: f64,
    /// Removed at WP1 or by round-trip loss.
    pub lost: f64,
    /// Still circulating after the last trip.
    pub in_loop: f64,
}

#[derive(Clone, Debug)]
pub struct LoopRun {
    pub report: StateReport,
    pub trace: Vec<TracePoint>,
    pub budget: PhotonBudget,
    /// Loop content and retained output bins after the last trip.
    pub state: MixedState,
}

/// Chance that a photon circulating in the lossy loop leaves after exactly r trips.
pub fn probability_leaves_after_r(r: u32, eta_l: f64) -> f64 {
    (eta_l / 2.0).powi(r as i32)
}

/// Overlap used at WP2 on trip `trip` (1-based).
///
/// Without diffraction this is the configured M. With diffraction the
/// looped field is assigned its photon-weighted mean age r̄ in round trips
/// (photons of age r carry weight (η/2)^r), and M is multiplied by the
/// Gaussian-beam overlap after r̄ loop lengths.
pub fn effective_overlap(p: &LoopParams, trip: usize) -> f64 {
    if !p.diffraction || trip <= 1 {
        return p.overlap;
    }
    let q = p.eta_l / 2.0;
    let (mut w, mut wr) = (0.0, 0.0);
    for r in 1..trip {
        let x = q.powi(r as i32);
        w += x;
        wr += x * r as f64;
    }
    if w == 0.0 {
        return p.overlap;
    }
    let z = p.loop_length_m * wr / w;
    p.overlap * diffraction_overlap(z, p.waist_mm, p.wavelength_nm)
}

/// Part of an occupation on which ket and bra must agree to matter for any
/// readout: non-reference tags, and H light at or before bin `t` (emitted
/// bins are read out in the photon-number basis).
fn readout_sector(o: &Occupation, t: i64) -> Occupation {
    o.partition(|m| m.tag != 0 || is_emitted(m, t)).0
}

fn is_emitted(m: &ModeId, t: i64) -> bool {
    m.kind == ModeKind::Optical && m.polarization == Polarization::H && m.time_bin <= t
}

fn in_loop(m: &ModeId, trip: i64) -> bool {
    m.kind == ModeKind::Optical && m.time_bin == trip
}

pub fn simulate(cfg: &EngineConfig) -> Result<LoopRun> {
    cfg.validate()?;
    let p = &cfg.loop_params;
    let mut rho = MixedState::vacuum(cfg.n_max);
    let mut dropped = 0.0;
    let mut budget = PhotonBudget::default();
    let mut trace = Vec::with_capacity(cfg.n_roundtrips);
    let mut last: Option<(Vec<f64>, DensityMatrix)> = None;

    for trip in 1..=cfg.n_roundtrips {
        let t = trip as i64;
        let loop_photons = |o: &Occupation| f64::from(o.total_where(|m| in_loop(m, t)));

        // fresh source photon on its own tag, then WP1
        let fresh = ModeId::h(t).with_tag(FRESH_TAG);
        let (next, overflow) = rho.inject(&[(Occupation::single(fresh, 1), 1.0)], |m| in_loop(m, t));
        dropped += overflow;
        budget.injected += 1.0;
        rho = next.apply_loss(fresh, WP1_TRANSMISSION);
        budget.lost += (1.0 - WP1_TRANSMISSION) * (1.0 - overflow);

        // round-trip loss on every occupied loop mode
        if p.eta_l < 1.0 {
            budget.lost += (1.0 - p.eta_l) * rho.expectation(loop_photons);
            let mut modes: Vec<ModeId> =
                rho.entries().flat_map(|(x, _, _)| x.iter()).filter(|(m, _)| in_loop(m, t)).map(|(m, _)| m).collect();
            modes.sort_unstable();
            modes.dedup();
            for m in modes {
                rho = rho.apply_loss(m, p.eta_l);
            }
        }

        // WP2 with partial overlap, then the PBS
        let split = overlap_split(fresh, ModeId::h(t), effective_overlap(p, trip));
        let wp = WaveplateAllTags { bin: t, convention: SignConvention::Standard };
        rho = rho.apply_sectored(&Chain(vec![&split, &wp]), |o| readout_sector(o, t));
        rho = rho.relabel(|o| o.map_modes(|m| pbs_label(m, t)));

        let bin = rho.reduce_to_bin(t);
        let pn = bin.photon_distribution();
        let (nbar, g2) = (mean(&pn), g2_from_pn(&pn));
        budget.emitted += nbar;
        trace.push(TracePoint { roundtrip: trip, nbar, g2_zero: g2 });
        last = Some((pn, bin));

        rho = housekeeping(&rho, t, cfg.retained_bins);
        let (pruned, w) = rho.prune(cfg.eps_amp);
        rho = pruned;
        dropped += w;
    }

    budget.in_loop = rho.expectation(|o| f64::from(o.total_where(|m| in_loop(m, cfg.n_roundtrips as i64 + 1))));
    let (pn, bin) = last.expect("at least one trip");
    let converged = match trace.as_slice() {
        [.., a, b] => (a.nbar - b.nbar).abs() < CONVERGENCE_TOL && (a.g2_zero - b.g2_zero).abs() < CONVERGENCE_TOL,
        _ => false,
    };
    let tp = *trace.last().expect("at least one trip");
    let report = StateReport {
        rho: bin.normalized()?,
        nbar: tp.nbar,
        g2_zero: tp.g2_zero,
        pn,
        dropped_weight: dropped,
        converged,
        roundtrips: cfg.n_roundtrips,
    };
    Ok(LoopRun { report, trace, budget, state: rho })
}

pub fn run_loop(cfg: &EngineConfig) -> Result<StateReport> {
    simulate(cfg).map(|r| r.report)
}

pub fn convergence_trace(cfg: &EngineConfig) -> Result<Vec<TracePoint>> {
    simulate(cfg).map(|r| r.trace)
}

/// Traces out expired output bins, dephases, and pools tags (see the module docs).
fn housekeeping(rho: &MixedState, t: i64, retained: usize) -> MixedState {
    let oldest_kept = t - retained as i64 + 1;
    let rho = rho.trace_out(|m| is_emitted(m, oldest_kept - 1));
    let rho = rho.retain(|x, y| readout_sector(x, t) == readout_sector(y, t));
    rho.relabel(|o| {
        o.map_modes(|m| match (m.tag, m.time_bin == t + 1) {
            (0, _) => m,
            (_, true) => m.with_tag(POOL_TAG),
            (_, false) => m.with_tag(0),
        })
    })
}
