//! Sparse multi-mode Fock states.
//!
//! A state is a map from occupation vectors to complex amplitudes. Occupation
//! vectors list only the modes that hold photons, sorted by [`ModeId`], so a
//! loop that touches hundreds of time bins still stores short keys.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};

/// Default hard cap on photons per term.
pub const DEFAULT_N_MAX: u32 = 8;
/// Default amplitude pruning threshold.
pub const DEFAULT_EPS_AMP: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

/// Environment modes absorb lost photons. They are never touched again
/// after the loss event and are traced out at readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    Optical,
    Environment,
}

/// A labelled bosonic mode: polarization, time bin (in units of the round
/// trip delay) and internal wavepacket tag. Tag 0 is the reference
/// wavepacket; tags above 0 are mutually orthogonal complements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId {
    pub kind: ModeKind,
    pub polarization: Polarization,
    pub time_bin: i64,
    pub tag: u32,
}

impl ModeId {
    pub const fn optical(polarization: Polarization, time_bin: i64) -> Self {
        ModeId { kind: ModeKind::Optical, polarization, time_bin, tag: 0 }
    }

    pub const fn h(time_bin: i64) -> Self {
        Self::optical(Polarization::H, time_bin)
    }

    pub const fn v(time_bin: i64) -> Self {
        Self::optical(Polarization::V, time_bin)
    }

    /// The `index`-th environment mode. Polarization carries no meaning here.
    pub const fn environment(index: i64) -> Self {
        ModeId { kind: ModeKind::Environment, polarization: Polarization::H, time_bin: index, tag: 0 }
    }

    pub const fn with_tag(self, tag: u32) -> Self {
        ModeId { tag, ..self }
    }

    pub const fn with_bin(self, time_bin: i64) -> Self {
        ModeId { time_bin, ..self }
    }

    /// Same bin and tag, opposite polarization.
    pub const fn partner(self) -> Self {
        let polarization = match self.polarization {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        };
        ModeId { polarization, ..self }
    }

    pub fn is_environment(&self) -> bool {
        self.kind == ModeKind::Environment
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModeKind::Environment => write!(f, "env{}", self.time_bin),
            ModeKind::Optical => write!(f, "{:?}{}#{}", self.polarization, self.time_bin, self.tag),
        }
    }
}

/// Sparse occupation vector: `(mode, count)` pairs, sorted, counts > 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(Vec<(ModeId, u32)>);

impl Occupation {
    pub fn vacuum() -> Self {
        Occupation(Vec::new())
    }

    pub fn single(mode: ModeId, n: u32) -> Self {
        Self::vacuum().with_count(mode, n)
    }

    /// Builds a canonical occupation, summing repeated modes and dropping zeros.
    pub fn from_counts<I: IntoIterator<Item = (ModeId, u32)>>(counts: I) -> Self {
        let mut merged: BTreeMap<ModeId, u32> = BTreeMap::new();
        for (m, n) in counts {
            *merged.entry(m).or_default() += n;
        }
        Occupation(merged.into_iter().filter(|&(_, n)| n > 0).collect())
    }

    pub fn count(&self, mode: ModeId) -> u32 {
        match self.0.binary_search_by(|(m, _)| m.cmp(&mode)) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&(_, n)| n).sum()
    }

    pub fn total_where(&self, pred: impl Fn(&ModeId) -> bool) -> u32 {
        self.0.iter().filter(|(m, _)| pred(m)).map(|&(_, n)| n).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeId, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with_count(&self, mode: ModeId, n: u32) -> Self {
        let mut v = self.0.clone();
        match v.binary_search_by(|(m, _)| m.cmp(&mode)) {
            Ok(i) if n == 0 => {
                v.remove(i);
            }
            Ok(i) => v[i].1 = n,
            Err(_) if n == 0 => {}
            Err(i) => v.insert(i, (mode, n)),
        }
        Occupation(v)
    }

    /// Splits into (modes satisfying `pred`, the rest).
    pub fn partition(&self, pred: impl Fn(&ModeId) -> bool) -> (Self, Self) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().partition(|(m, _)| pred(m));
        (Occupation(a), Occupation(b))
    }

    /// Relabels every mode; photons landing on the same mode are merged.
    pub fn map_modes(&self, f: impl Fn(ModeId) -> ModeId) -> Self {
        Self::from_counts(self.0.iter().map(|&(m, n)| (f(m), n)))
    }

    /// Photon-wise sum of two occupations.
    pub fn union(&self, other: &Occupation) -> Self {
        Self::from_counts(self.iter().chain(other.iter()))
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "|vac>");
        }
        write!(f, "|")?;
        for (i, (m, n)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}:{n}")?;
        }
        write!(f, ">")
    }
}

/// A linear map acting on occupation-basis kets.
///
/// `apply` returns the image of a basis ket as a list of (ket, amplitude).
/// Implementations must be deterministic; the returned list need not be merged.
pub trait ModeMap: Sync {
    fn apply(&self, occ: &Occupation) -> Vec<(Occupation, Complex64)>;
}

impl<F> ModeMap for F
where
    F: Fn(&Occupation) -> Vec<(Occupation, Complex64)> + Sync,
{
    fn apply(&self, occ: &Occupation) -> Vec<(Occupation, Complex64)> {
        self(occ)
    }
}

/// Applies `maps` in order, merging equal kets after every stage.
pub struct Chain<'a>(pub Vec<&'a dyn ModeMap>);

impl ModeMap for Chain<'_> {
    fn apply(&self, occ: &Occupation) -> Vec<(Occupation, Complex64)> {
        let mut current = vec![(occ.clone(), Complex64::new(1.0, 0.0))];
        for map in &self.0 {
            let mut next: BTreeMap<Occupation, Complex64> = BTreeMap::new();
            for (o, a) in &current {
                for (o2, b) in map.apply(o) {
                    *next.entry(o2).or_default() += a * b;
                }
            }
            current = next.into_iter().filter(|(_, a)| a.norm_sqr() > 0.0).collect();
        }
        current
    }
}

/// Photon-number-preserving two-mode transform of creation operators.
///
/// Column `j` of `u` is the image of mode `j`:
/// a† → u[0][0] a† + u[1][0] b†, b† → u[0][1] a† + u[1][1] b†.
#[derive(Clone, Copy, Debug)]
pub struct TwoModeTransform {
    pub a: ModeId,
    pub b: ModeId,
    pub u: [[Complex64; 2]; 2],
}

impl ModeMap for TwoModeTransform {
    fn apply(&self, occ: &Occupation) -> Vec<(Occupation, Complex64)> {
        let h = occ.count(self.a);
        let v = occ.count(self.b);
        if h == 0 && v == 0 {
            return vec![(occ.clone(), Complex64::new(1.0, 0.0))];
        }
        let [[u00, u01], [u10, u11]] = self.u;
        let mut amps = vec![Complex64::new(0.0, 0.0); (h + v + 1) as usize];
        for j in 0..=h {
            let ca = binomial(h, j) * u00.powu(h - j) * u10.powu(j);
            for k in 0..=v {
                let cb = binomial(v, k) * u01.powu(v - k) * u11.powu(k);
                let q = j + k;
                let p = h + v - q;
                let norm = (factorial(p) * factorial(q) / (factorial(h) * factorial(v))).sqrt();
                amps[q as usize] += ca * cb * norm;
            }
        }
        let rest = occ.with_count(self.a, 0).with_count(self.b, 0);
        amps.into_iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(q, c)| {
                let q = q as u32;
                (rest.with_count(self.a, h + v - q).with_count(self.b, q), c)
            })
            .collect()
    }
}

/// The `lost`-photon Kraus operator of a pure-loss channel on one mode:
/// K_l |n⟩ = √C(n,l) t^(n−l) (i r)^l |n−l⟩ with t = √η, r = √(1−η).
#[derive(Clone, Copy, Debug)]
pub struct LossKraus {
    pub mode: ModeId,
    pub eta: f64,
    pub lost: u32,
}

impl ModeMap for LossKraus {
    fn apply(&self, occ: &Occupation) -> Vec<(Occupation, Complex64)> {
        let n = occ.count(self.mode);
        if n < self.lost {
            return Vec::new();
        }
        let t = self.eta.sqrt();
        let ir = Complex64::new(0.0, (1.0 - self.eta).sqrt());
        let amp = binomial(n, self.lost).sqrt() * t.powi((n - self.lost) as i32) * ir.powu(self.lost);
        if amp.norm_sqr() == 0.0 {
            return Vec::new();
        }
        vec![(occ.with_count(self.mode, n - self.lost), amp)]
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Sparse pure state over occupation vectors.
///
/// Immutable value: every operation returns a new state.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    terms: BTreeMap<Occupation, Complex64>,
    n_max: u32,
    eps_amp: f64,
    norm_sq: f64,
}

impl FockState {
    pub fn vacuum(n_max: u32) -> Self {
        Self::from_occupation(Occupation::vacuum(), n_max)
    }

    pub fn from_occupation(occ: Occupation, n_max: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(occ, Complex64::new(1.0, 0.0));
        FockState { terms, n_max, eps_amp: DEFAULT_EPS_AMP, norm_sq: 1.0 }
    }

    /// Builds a state from explicit terms. Terms above `n_max` are rejected.
    pub fn from_terms<I>(terms: I, n_max: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, Complex64)>,
    {
        let mut map: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, a) in terms {
            if occ.total() > n_max {
                return Err(Error::TruncationOverflow { n_max, weight: a.norm_sqr() });
            }
            *map.entry(occ).or_default() += a;
        }
        Ok(Self::from_map(map, n_max, DEFAULT_EPS_AMP))
    }

    fn from_map(mut terms: BTreeMap<Occupation, Complex64>, n_max: u32, eps_amp: f64) -> Self {
        terms.retain(|_, a| a.norm() > eps_amp && a.norm_sqr() > 0.0);
        let norm_sq = terms.values().map(|a| a.norm_sqr()).sum();
        FockState { terms, n_max, eps_amp, norm_sq }
    }

    /// Same state with a different pruning threshold for subsequent operations.
    pub fn with_eps_amp(mut self, eps_amp: f64) -> Self {
        self.eps_amp = eps_amp;
        self
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn eps_amp(&self) -> f64 {
        self.eps_amp
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// True for the zero vector (for example after annihilating the vacuum).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.terms.get(occ).copied().unwrap_or_default()
    }

    /// Applies a linear map. Image terms above `n_max` are dropped and their
    /// weight is returned alongside the new state.
    pub fn apply_map(&self, map: &dyn ModeMap) -> (FockState, f64) {
        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        let mut overflow = 0.0;
        for (occ, a) in &self.terms {
            for (o2, b) in map.apply(occ) {
                if o2.total() > self.n_max {
                    overflow += (a * b).norm_sqr();
                } else {
                    *out.entry(o2).or_default() += a * b;
                }
            }
        }
        (Self::from_map(out, self.n_max, self.eps_amp), overflow)
    }

    /// a† on `mode`. Fails if any term would exceed `n_max`.
    pub fn create(&self, mode: ModeId) -> Result<FockState> {
        let (state, overflow) = self.create_truncating(mode);
        if overflow > 0.0 {
            return Err(Error::TruncationOverflow { n_max: self.n_max, weight: overflow });
        }
        Ok(state)
    }

    /// a† on `mode`, dropping overflowing terms and reporting their weight.
    pub fn create_truncating(&self, mode: ModeId) -> (FockState, f64) {
        let map = move |occ: &Occupation| {
            let n = occ.count(mode);
            vec![(occ.with_count(mode, n + 1), Complex64::new(f64::from(n + 1).sqrt(), 0.0))]
        };
        self.apply_map(&map)
    }

    /// a on `mode`. The vacuum maps to the zero vector.
    pub fn annihilate(&self, mode: ModeId) -> FockState {
        let map = move |occ: &Occupation| {
            let n = occ.count(mode);
            if n == 0 {
                Vec::new()
            } else {
                vec![(occ.with_count(mode, n - 1), Complex64::new(f64::from(n).sqrt(), 0.0))]
            }
        };
        self.apply_map(&map).0
    }

    pub fn relabel(&self, f: impl Fn(ModeId) -> ModeId + Sync) -> FockState {
        let map = |occ: &Occupation| vec![(occ.map_modes(&f), Complex64::new(1.0, 0.0))];
        self.apply_map(&map).0
    }

    pub fn normalized(&self) -> Result<FockState> {
        if self.norm_sq <= 0.0 {
            return Err(Error::ZeroState);
        }
        let s = self.norm_sq.sqrt();
        let terms = self.terms.iter().map(|(o, a)| (o.clone(), a / s)).collect();
        Ok(Self::from_map(terms, self.n_max, self.eps_amp))
    }

    /// Drops terms with |amplitude|² < eps², renormalizes, and returns the
    /// dropped probability weight (relative to the incoming norm).
    pub fn prune_and_renormalize(&self, eps_amp: f64) -> (FockState, f64) {
        let eps_sq = eps_amp * eps_amp;
        let total = self.norm_sq;
        let kept: BTreeMap<_, _> = self
            .terms
            .iter()
            .filter(|(_, a)| a.norm_sqr() >= eps_sq)
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        let kept_sq: f64 = kept.values().map(|a| a.norm_sqr()).sum();
        if kept_sq == 0.0 || total == 0.0 {
            return (Self::from_map(BTreeMap::new(), self.n_max, self.eps_amp), total.min(1.0));
        }
        let dropped = ((total - kept_sq) / total).max(0.0);
        if dropped == 0.0 {
            return (self.clone(), 0.0);
        }
        let s = (kept_sq / total).sqrt();
        let terms = kept.into_iter().map(|(o, a)| (o, a / s)).collect();
        (Self::from_map(terms, self.n_max, 0.0), dropped)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockState) -> Complex64 {
        self.terms
            .iter()
            .filter_map(|(o, a)| other.terms.get(o).map(|b| a.conj() * b))
            .sum()
    }

    /// ⟨n̂⟩ on `mode`.
    pub fn mean_photons(&self, mode: ModeId) -> f64 {
        self.terms.iter().map(|(o, a)| f64::from(o.count(mode)) * a.norm_sqr()).sum::<f64>() / self.norm_sq
    }

    /// Time bins of optical modes that appear in any term.
    pub fn bins(&self) -> std::collections::BTreeSet<i64> {
        self.terms
            .keys()
            .flat_map(|o| o.iter().filter(|(m, _)| !m.is_environment()).map(|(m, _)| m.time_bin))
            .collect()
    }

    /// Reduced state of the H-polarized output mode at `bin`.
    ///
    /// Tag 0 of the bin is kept coherently. Photons in other tags of the bin
    /// are traced out as part of the environment but still counted, so the
    /// diagonal is the tag-blind photon-number distribution.
    pub fn partial_trace_to_bin(&self, bin: i64) -> Result<DensityMatrix> {
        if !self.bins().contains(&bin) {
            return Err(Error::UnknownBin(bin));
        }
        let mut groups: BTreeMap<Occupation, Vec<(u32, Complex64)>> = BTreeMap::new();
        for (occ, a) in &self.terms {
            let (n0, rest) = split_bin(occ, bin);
            groups.entry(rest).or_default().push((n0, *a));
        }
        let dim = self.n_max as usize + 1;
        let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for (rest, members) in &groups {
            let shift = rest.total_where(|m| is_bin_mode(m, bin));
            for &(n, a) in members {
                for &(m, b) in members {
                    rho[((n + shift) as usize, (m + shift) as usize)] += a * b.conj();
                }
            }
        }
        Ok(DensityMatrix::from_matrix(rho / Complex64::new(self.norm_sq, 0.0)))
    }
}

/// Optical H modes at `bin` with any tag.
pub(crate) fn is_bin_mode(m: &ModeId, bin: i64) -> bool {
    m.kind == ModeKind::Optical && m.polarization == Polarization::H && m.time_bin == bin
}

/// Splits an occupation into the tag-0 count of the H mode at `bin` and the
/// remainder (which still contains the bin's other tags).
pub(crate) fn split_bin(occ: &Occupation, bin: i64) -> (u32, Occupation) {
    let mode = ModeId::h(bin);
    (occ.count(mode), occ.with_count(mode, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn creation_on_vacuum() {
        let m = ModeId::h(0);
        let s = FockState::vacuum(4).create(m).unwrap();
        assert_eq!(s.amplitude(&Occupation::single(m, 1)), c(1.0));
    }

    #[test]
    fn creation_carries_sqrt_n_plus_one() {
        let m = ModeId::h(0);
        let s = FockState::from_occupation(Occupation::single(m, 1), 4).create(m).unwrap();
        assert_abs_diff_eq!(s.amplitude(&Occupation::single(m, 2)).re, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn aa_adag_adag_vacuum_is_two() {
        let m = ModeId::v(3);
        let s = FockState::vacuum(4).create(m).unwrap().create(m).unwrap();
        let s = s.annihilate(m).annihilate(m);
        assert_abs_diff_eq!(s.amplitude(&Occupation::vacuum()).re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn annihilating_vacuum_gives_zero_vector() {
        let s = FockState::vacuum(2).annihilate(ModeId::h(0));
        assert!(s.is_zero());
        assert!(matches!(s.normalized(), Err(Error::ZeroState)));
    }

    #[test]
    fn annihilation_on_truncated_coherent_pattern() {
        // (|0> + |1> + |2>/sqrt2) N  ->  a gives N(|0> + |1>)
        let m = ModeId::h(0);
        let terms = [(0u32, 1.0), (1, 1.0), (2, 1.0 / 2f64.sqrt())]
            .map(|(n, a)| (Occupation::single(m, n), c(a)));
        let s = FockState::from_terms(terms, 4).unwrap().normalized().unwrap();
        let out = s.annihilate(m).normalized().unwrap();
        let a0 = out.amplitude(&Occupation::vacuum()).re;
        let a1 = out.amplitude(&Occupation::single(m, 1)).re;
        assert_abs_diff_eq!(a0, a1, epsilon = 1e-14);
        assert_abs_diff_eq!(a0, 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn overflow_is_signalled() {
        let m = ModeId::h(0);
        let s = FockState::from_occupation(Occupation::single(m, 2), 2);
        assert!(matches!(s.create(m), Err(Error::TruncationOverflow { .. })));
        let (t, w) = s.create_truncating(m);
        assert!(t.is_zero());
        assert_abs_diff_eq!(w, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn creation_commutes_across_modes() {
        let (a, b) = (ModeId::h(1), ModeId::v(1).with_tag(2));
        let base = FockState::from_occupation(Occupation::single(a, 1), 6);
        let ab = base.create(a).unwrap().create(b).unwrap();
        let ba = base.create(b).unwrap().create(a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn prune_identity_cases() {
        let m = ModeId::h(0);
        let s = FockState::from_occupation(Occupation::single(m, 1), 3);
        assert_eq!(s.prune_and_renormalize(0.0), (s.clone(), 0.0));
        assert_eq!(s.prune_and_renormalize(0.9).1, 0.0);
    }

    #[test]
    fn prune_reports_dropped_weight() {
        let m = ModeId::h(0);
        let terms = [(Occupation::vacuum(), c(0.999f64.sqrt())), (Occupation::single(m, 1), c(0.001f64.sqrt()))];
        let s = FockState::from_terms(terms, 3).unwrap();
        let (p, w) = s.prune_and_renormalize(0.05);
        assert_abs_diff_eq!(w, 0.001, epsilon = 1e-12);
        assert_abs_diff_eq!(p.norm_sq(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_state_reduces_to_pure_fock() {
        let occ = Occupation::from_counts([(ModeId::h(2), 1), (ModeId::v(7), 1)]);
        let rho = FockState::from_occupation(occ, 3).partial_trace_to_bin(2).unwrap();
        assert_abs_diff_eq!(rho.element(1, 1).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bell_pair_across_bins_gives_mixed_marginal() {
        let s = 0.5f64.sqrt();
        let terms = [(Occupation::single(ModeId::h(1), 1), c(s)), (Occupation::single(ModeId::h(2), 1), c(s))];
        let rho = FockState::from_terms(terms, 2).unwrap().partial_trace_to_bin(1).unwrap();
        assert_abs_diff_eq!(rho.element(0, 0).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.element(1, 1).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.element(0, 1).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn distinguishable_tags_count_but_do_not_cohere() {
        // (|1_tag0> + |1_tag1>)/sqrt2 in one bin: always one photon, no coherence to vacuum
        let s = 0.5f64.sqrt();
        let terms = [
            (Occupation::single(ModeId::h(0), 1), c(s)),
            (Occupation::single(ModeId::h(0).with_tag(1), 1), c(s)),
        ];
        let rho = FockState::from_terms(terms, 2).unwrap().partial_trace_to_bin(0).unwrap();
        assert_abs_diff_eq!(rho.element(1, 1).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn unknown_bin_is_rejected() {
        let s = FockState::from_occupation(Occupation::single(ModeId::h(0), 1), 2);
        assert!(matches!(s.partial_trace_to_bin(5), Err(Error::UnknownBin(5))));
    }

    #[test]
    fn loss_kraus_binomial() {
        let m = ModeId::h(0);
        let occ = Occupation::single(m, 2);
        let eta = 0.3;
        let p: Vec<f64> = (0..=2)
            .map(|l| LossKraus { mode: m, eta, lost: l }.apply(&occ).iter().map(|(_, a)| a.norm_sqr()).sum())
            .collect();
        assert_abs_diff_eq!(p[0], eta * eta, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 2.0 * eta * (1.0 - eta), epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], (1.0 - eta).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn binomial_and_factorial() {
        assert_eq!(binomial(6, 2), 15.0);
        assert_eq!(binomial(2, 3), 0.0);
        assert_eq!(factorial(5), 120.0);
    }
}
