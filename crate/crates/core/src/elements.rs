//! Optical elements of the loop: half-wave plates, the partial-overlap mixer,
//! pure loss, polarizing-beamsplitter routing and the diffraction overlap.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Chain, FockState, LossKraus, ModeId, ModeMap, Occupation, Polarization, TwoModeTransform};
use crate::tolerances::UNITARITY_TOL;

/// Speed of light in m/ns.
pub const C_M_PER_NS: f64 = 0.299_792_458;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopParams {
    /// Round-trip power transmission η_L.
    pub eta_l: f64,
    /// Round-trip delay R in ns.
    pub round_trip_ns: f64,
    /// Wave-function overlap M between fresh and looped photons.
    pub overlap: f64,
    /// Beam waist w₀ in mm.
    pub waist_mm: f64,
    /// Wavelength in nm.
    pub wavelength_nm: f64,
    /// Reduce the overlap with accumulated free-space propagation.
    pub diffraction: bool,
    /// Free-space loop length in m.
    pub loop_length_m: f64,
}

impl Default for LoopParams {
    fn default() -> Self {
        LoopParams {
            eta_l: 0.9,
            round_trip_ns: 1.0 / C_M_PER_NS,
            overlap: 1.0,
            waist_mm: 0.50,
            wavelength_nm: 935.0,
            diffraction: false,
            loop_length_m: 1.0,
        }
    }
}

impl LoopParams {
    pub fn lossless() -> Self {
        LoopParams { eta_l: 1.0, ..Self::default() }
    }

    pub fn with_eta(self, eta_l: f64) -> Self {
        LoopParams { eta_l, ..self }
    }

    pub fn with_overlap(self, overlap: f64) -> Self {
        LoopParams { overlap, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.eta_l) {
            return Err(Error::invalid(format!("eta_l={} outside [0,1]", self.eta_l)));
        }
        if !unit.contains(&self.overlap) {
            return Err(Error::invalid(format!("overlap M={} outside [0,1]", self.overlap)));
        }
        if !(self.round_trip_ns > 0.0) {
            return Err(Error::invalid("round-trip delay must be positive"));
        }
        if !(self.waist_mm > 0.0) || !(self.wavelength_nm > 0.0) || !(self.loop_length_m > 0.0) {
            return Err(Error::invalid("waist, wavelength and loop length must be positive"));
        }
        Ok(())
    }
}

/// Orientation of the 22.5° half-wave plate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignConvention {
    /// a† → (a†+b†)/√2, b† → (a†−b†)/√2.
    #[default]
    Standard,
    /// a† → (−a†+b†)/√2, b† → (a†+b†)/√2.
    Mirrored,
}

pub fn wp_transform(a: ModeId, b: ModeId, convention: SignConvention) -> TwoModeTransform {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let u = match convention {
        SignConvention::Standard => [[s, s], [s, -s]],
        SignConvention::Mirrored => [[-s, s], [s, s]],
    };
    TwoModeTransform { a, b, u }
}

/// 50/50 half-wave-plate mix of two modes in the same time bin.
pub fn wp_mix(state: &FockState, a: ModeId, b: ModeId, convention: SignConvention) -> Result<FockState> {
    if a == b {
        return Err(Error::invalid("wp_mix needs two distinct modes"));
    }
    if a.time_bin != b.time_bin {
        return Err(Error::invalid("wp_mix modes must share a time bin"));
    }
    apply_unitary(state, &wp_transform(a, b, convention))
}

fn apply_unitary(state: &FockState, map: &dyn ModeMap) -> Result<FockState> {
    let (out, overflow) = state.apply_map(map);
    if overflow > 0.0 {
        return Err(Error::TruncationOverflow { n_max: state.n_max(), weight: overflow });
    }
    // pruning below eps_amp may remove a sliver of norm; anything more is a bug
    let drift = (out.norm_sq() - state.norm_sq()).abs();
    debug_assert!(drift <= UNITARITY_TOL + out.len() as f64 * state.eps_amp().powi(2), "norm drift {drift}");
    Ok(out)
}

/// Moves √M of the fresh H photon into the reference tag of the loop H mode.
///
/// a_f† → √(1−M) a_f† + √M a_0†; the completion keeps the map unitary.
pub fn overlap_split(fresh_h: ModeId, loop_h: ModeId, overlap: f64) -> TwoModeTransform {
    let m = Complex64::new(overlap.sqrt(), 0.0);
    let c = Complex64::new((1.0 - overlap).sqrt(), 0.0);
    TwoModeTransform { a: fresh_h, b: loop_h, u: [[c, -m], [m, c]] }
}

/// Half-wave-plate mix of the H/V pair of every tag present at `bin`.
#[derive(Clone, Copy, Debug)]
pub struct WaveplateAllTags {
    pub bin: i64,
    pub convention: SignConvention,
}

impl ModeMap for WaveplateAllTags {
    fn apply(&self, occ: &Occupation) -> Vec<(Occupation, Complex64)> {
        let mut tags: Vec<u32> =
            occ.iter().filter(|(m, _)| !m.is_environment() && m.time_bin == self.bin).map(|(m, _)| m.tag).collect();
        tags.sort_unstable();
        tags.dedup();
        let maps: Vec<TwoModeTransform> = tags
            .iter()
            .map(|&t| wp_transform(ModeId::h(self.bin).with_tag(t), ModeId::v(self.bin).with_tag(t), self.convention))
            .collect();
        Chain(maps.iter().map(|m| m as &dyn ModeMap).collect()).apply(occ)
    }
}

/// Partial-overlap interference at WP2.
///
/// The fresh photons in `fresh.0` are split into √M on the loop reference
/// wavepacket (`looped.0`) and √(1−M) left on their own tag, then each tag's
/// H/V pair is mixed by the half-wave plate.
pub fn wp2_partial(
    state: &FockState,
    fresh: (ModeId, ModeId),
    looped: (ModeId, ModeId),
    overlap: f64,
) -> Result<FockState> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap M={overlap} outside [0,1]")));
    }
    if fresh.0.tag == looped.0.tag {
        return Err(Error::invalid("fresh and loop modes need different tags"));
    }
    let split = overlap_split(fresh.0, looped.0, overlap);
    let wp_loop = wp_transform(looped.0, looped.1, SignConvention::Standard);
    let wp_fresh = wp_transform(fresh.0, fresh.1, SignConvention::Standard);
    apply_unitary(state, &Chain(vec![&split, &wp_loop, &wp_fresh]))
}

/// Hands out fresh environment modes.
#[derive(Clone, Debug, Default)]
pub struct EnvAllocator {
    next: i64,
}

impl EnvAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self) -> ModeId {
        let m = ModeId::environment(self.next);
        self.next += 1;
        m
    }

    pub fn allocated(&self) -> usize {
        self.next as usize
    }
}

/// Pure loss as a beamsplitter with a fresh environment mode:
/// a† → √η a† + i√(1−η) e†.
pub fn loss_channel(state: &FockState, mode: ModeId, eta: f64, env: &mut EnvAllocator) -> Result<FockState> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta={eta} outside [0,1]")));
    }
    if eta == 1.0 {
        return Ok(state.clone());
    }
    let e = env.allocate();
    let t = Complex64::new(eta.sqrt(), 0.0);
    let ir = Complex64::new(0.0, (1.0 - eta).sqrt());
    let bs = TwoModeTransform { a: mode, b: e, u: [[t, ir], [ir, t]] };
    apply_unitary(state, &bs)
}

/// Kraus operators of the same channel with the environment traced out.
pub fn loss_kraus(mode: ModeId, eta: f64, n_max: u32) -> Vec<LossKraus> {
    (0..=n_max).map(|lost| LossKraus { mode, eta, lost }).collect()
}

/// Mode relabelling performed by the PBS at the end of trip `bin`.
///
/// H photons at `bin` leave through the output port and keep their label,
/// which from then on names output bin `bin`. V photons stay in the loop and
/// are relabelled to `bin + 1`, the time of their next arrival.
pub fn pbs_label(m: ModeId, bin: i64) -> ModeId {
    if !m.is_environment() && m.time_bin == bin && m.polarization == Polarization::V {
        m.with_bin(bin + 1)
    } else {
        m
    }
}

pub fn pbs_route(state: &FockState, bin: i64) -> FockState {
    state.relabel(move |m| pbs_label(m, bin))
}

/// Overlap of a Gaussian beam with itself after `z_m` of free propagation:
/// |k w₀² / (k w₀² + i z)|².
pub fn diffraction_overlap(z_m: f64, waist_mm: f64, wavelength_nm: f64) -> f64 {
    let k = 2.0 * PI / (wavelength_nm * 1e-9);
    let kw2 = k * (waist_mm * 1e-3).powi(2);
    let r = kw2 / (kw2 * kw2 + z_m * z_m).sqrt();
    r * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn st(pairs: &[(ModeId, u32)]) -> FockState {
        FockState::from_occupation(Occupation::from_counts(pairs.iter().copied()), 6)
    }

    fn amp(s: &FockState, pairs: &[(ModeId, u32)]) -> Complex64 {
        s.amplitude(&Occupation::from_counts(pairs.iter().copied()))
    }

    const A: ModeId = ModeId::h(0);
    const B: ModeId = ModeId::v(0);

    #[test]
    fn single_photon_splits_evenly() {
        let out = wp_mix(&st(&[(A, 1)]), A, B, SignConvention::Standard).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(amp(&out, &[(A, 1)]).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(amp(&out, &[(B, 1)]).re, s, epsilon = 1e-15);
    }

    #[test]
    fn hom_pair_never_coincides() {
        let out = wp_mix(&st(&[(A, 1), (B, 1)]), A, B, SignConvention::Standard).unwrap();
        assert_eq!(amp(&out, &[(A, 1), (B, 1)]), Complex64::new(0.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(amp(&out, &[(A, 2)]).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(amp(&out, &[(B, 2)]).re, -s, epsilon = 1e-15);
    }

    #[test]
    fn two_photons_in_one_port() {
        let out = wp_mix(&st(&[(A, 2)]), A, B, SignConvention::Standard).unwrap();
        assert_abs_diff_eq!(amp(&out, &[(A, 2)]).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(amp(&out, &[(A, 1), (B, 1)]).re, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(amp(&out, &[(B, 2)]).re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn waveplate_is_an_involution() {
        for conv in [SignConvention::Standard, SignConvention::Mirrored] {
            let s = st(&[(A, 2), (B, 1)]);
            let twice = wp_mix(&wp_mix(&s, A, B, conv).unwrap(), A, B, conv).unwrap();
            assert_abs_diff_eq!(twice.inner(&s).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wp_mix_rejects_mismatched_modes() {
        assert!(wp_mix(&st(&[(A, 1)]), A, A, SignConvention::Standard).is_err());
        assert!(wp_mix(&st(&[(A, 1)]), A, ModeId::v(1), SignConvention::Standard).is_err());
    }

    fn coincidence(overlap: f64) -> f64 {
        let fresh = (ModeId::h(0).with_tag(1), ModeId::v(0).with_tag(1));
        let looped = (A, B);
        let s = st(&[(fresh.0, 1), (looped.1, 1)]);
        let out = wp2_partial(&s, fresh, looped, overlap).unwrap();
        out.terms()
            .filter(|(o, _)| {
                let h = o.total_where(|m| m.polarization == Polarization::H);
                let v = o.total_where(|m| m.polarization == Polarization::V);
                h == 1 && v == 1
            })
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    #[test]
    fn partial_overlap_coincidences() {
        assert_abs_diff_eq!(coincidence(1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(coincidence(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(coincidence(0.5), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn full_overlap_reduces_to_plain_mix() {
        let fresh = (ModeId::h(0).with_tag(1), ModeId::v(0).with_tag(1));
        let s = st(&[(fresh.0, 1), (B, 1)]);
        let a = wp2_partial(&s, fresh, (A, B), 1.0).unwrap();
        let b = wp_mix(&st(&[(A, 1), (B, 1)]), A, B, SignConvention::Standard).unwrap();
        assert_abs_diff_eq!(a.inner(&b).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_photon_loss() {
        let mut env = EnvAllocator::new();
        let out = loss_channel(&st(&[(A, 1)]), A, 0.7, &mut env).unwrap();
        assert_abs_diff_eq!(out.mean_photons(A), 0.7, epsilon = 1e-15);
        let e = ModeId::environment(0);
        assert_abs_diff_eq!(amp(&out, &[(e, 1)]).im, 0.3f64.sqrt(), epsilon = 1e-15);
        assert_eq!(loss_channel(&st(&[(A, 1)]), A, 1.0, &mut env).unwrap(), st(&[(A, 1)]));
    }

    #[test]
    fn two_photon_loss_is_binomial() {
        let eta = 0.6;
        let mut env = EnvAllocator::new();
        let out = loss_channel(&st(&[(A, 2)]), A, eta, &mut env).unwrap();
        let p = |n: u32| -> f64 { out.terms().filter(|(o, _)| o.count(A) == n).map(|(_, a)| a.norm_sqr()).sum() };
        assert_abs_diff_eq!(p(2), eta * eta, epsilon = 1e-15);
        assert_abs_diff_eq!(p(1), 2.0 * eta * (1.0 - eta), epsilon = 1e-15);
        assert_abs_diff_eq!(p(0), (1.0 - eta).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn routing() {
        let v = pbs_route(&st(&[(B, 1)]), 0);
        assert_eq!(amp(&v, &[(ModeId::v(1), 1)]).re, 1.0);
        let h = pbs_route(&st(&[(A, 1)]), 0);
        assert_eq!(amp(&h, &[(A, 1)]).re, 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sup = FockState::from_terms(
            [(Occupation::single(A, 1), Complex64::new(s, 0.0)), (Occupation::single(B, 1), Complex64::new(s, 0.0))],
            2,
        )
        .unwrap();
        let r = pbs_route(&sup, 0);
        assert_abs_diff_eq!(amp(&r, &[(A, 1)]).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(amp(&r, &[(ModeId::v(1), 1)]).re, s, epsilon = 1e-15);
    }

    #[test]
    fn diffraction_values() {
        assert_eq!(diffraction_overlap(0.0, 0.5, 935.0), 1.0);
        assert_abs_diff_eq!(diffraction_overlap(1.0, 0.5, 935.0), 0.738, epsilon = 5e-4);
        let far = diffraction_overlap(3.0, 0.5, 935.0);
        assert!(far < 0.3 && far < diffraction_overlap(2.0, 0.5, 935.0));
    }

    #[test]
    fn loop_params_validation() {
        assert!(LoopParams::default().validate().is_ok());
        assert!(LoopParams::default().with_eta(1.2).validate().is_err());
        assert!(LoopParams::default().with_overlap(-0.1).validate().is_err());
    }
}
