//! Sparse density operators over occupation vectors.
//!
//! The loop engine propagates a [`MixedState`] rather than a purified
//! [`FockState`]: loss is applied as a Kraus channel instead of spawning an
//! environment mode per event, which keeps the representation bounded over
//! many round trips.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;

use num_complex::Complex64;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::{binomial, split_bin, FockState, ModeId, ModeMap, Occupation};

type Key = (Occupation, Occupation);

/// ρ = Σ ρ_xy |x⟩⟨y| stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    entries: BTreeMap<Key, Complex64>,
    n_max: u32,
}

impl MixedState {
    pub fn vacuum(n_max: u32) -> Self {
        Self::from_pure(&FockState::vacuum(n_max))
    }

    pub fn from_pure(psi: &FockState) -> Self {
        let terms: Vec<_> = psi.terms().collect();
        let mut entries = BTreeMap::new();
        for (x, a) in &terms {
            for (y, b) in &terms {
                entries.insert(((*x).clone(), (*y).clone()), **a * b.conj());
            }
        }
        MixedState { entries, n_max: psi.n_max() }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Occupation, &Occupation, &Complex64)> {
        self.entries.iter().map(|((x, y), v)| (x, y, v))
    }

    pub fn trace(&self) -> f64 {
        self.entries.iter().filter(|((x, y), _)| x == y).map(|(_, v)| v.re).sum()
    }

    /// Σ_x ρ_xx f(x).
    pub fn expectation(&self, f: impl Fn(&Occupation) -> f64) -> f64 {
        self.entries.iter().filter(|((x, y), _)| x == y).map(|((x, _), v)| v.re * f(x)).sum()
    }

    /// A ρ A† for a linear map A.
    pub fn apply(&self, map: &dyn ModeMap) -> MixedState {
        self.apply_channel(&[map])
    }

    /// Σ_k K_k ρ K_k†.
    pub fn apply_channel(&self, kraus: &[&dyn ModeMap]) -> MixedState {
        self.apply_channel_sectored(kraus, |_| Occupation::vacuum())
    }

    /// A ρ A†, keeping only output entries whose ket and bra share the same
    /// `sector` key. Equivalent to applying A and then discarding the
    /// cross-sector entries, without ever materializing them.
    pub fn apply_sectored(&self, map: &dyn ModeMap, sector: impl Fn(&Occupation) -> Occupation) -> MixedState {
        self.apply_channel_sectored(&[map], sector)
    }

    fn apply_channel_sectored(
        &self,
        kraus: &[&dyn ModeMap],
        sector: impl Fn(&Occupation) -> Occupation,
    ) -> MixedState {
        type Image = Vec<(Occupation, Vec<(Occupation, Complex64)>)>;
        let bucket = |img: Vec<(Occupation, Complex64)>| -> Image {
            let mut groups: BTreeMap<Occupation, Vec<(Occupation, Complex64)>> = BTreeMap::new();
            for (o, a) in img {
                groups.entry(sector(&o)).or_default().push((o, a));
            }
            groups.into_iter().collect()
        };
        let mut out: HashMap<Key, Complex64> = HashMap::default();
        for k in kraus {
            let mut cache: HashMap<&Occupation, Image> = HashMap::default();
            for ((x, y), v) in &self.entries {
                if !cache.contains_key(x) {
                    cache.insert(x, bucket(k.apply(x)));
                }
                if !cache.contains_key(y) {
                    cache.insert(y, bucket(k.apply(y)));
                }
                let (ix, iy) = (&cache[x], &cache[y]);
                for (sx, gx) in ix {
                    let Ok(j) = iy.binary_search_by(|(sy, _)| sy.cmp(sx)) else { continue };
                    for (x2, a) in gx {
                        for (y2, b) in &iy[j].1 {
                            *out.entry((x2.clone(), y2.clone())).or_default() += v * a * b.conj();
                        }
                    }
                }
            }
        }
        self.rebuild(out)
    }

    /// Pure-loss channel of transmission `eta` on one mode, in a single pass.
    ///
    /// Same result as [`Self::apply_channel`] with the loss Kraus operators.
    pub fn apply_loss(&self, mode: ModeId, eta: f64) -> MixedState {
        let t = eta.sqrt();
        let r2 = 1.0 - eta;
        let mut out: HashMap<Key, Complex64> = HashMap::default();
        for ((x, y), v) in &self.entries {
            let (nx, ny) = (x.count(mode), y.count(mode));
            for l in 0..=nx.min(ny) {
                // (i r)^l (−i r)^l = r^(2l)
                let w = (binomial(nx, l) * binomial(ny, l)).sqrt()
                    * t.powi((nx + ny - 2 * l) as i32)
                    * r2.powi(l as i32);
                if w == 0.0 {
                    continue;
                }
                let key = (x.with_count(mode, nx - l), y.with_count(mode, ny - l));
                *out.entry(key).or_default() += v * w;
            }
        }
        self.rebuild(out)
    }

    /// ρ ⊗ Σ_k p_k |x_k⟩⟨x_k|. Terms whose photon count over `counted` modes
    /// exceeds `n_max` are dropped; their diagonal weight is returned.
    pub fn inject(&self, mixture: &[(Occupation, f64)], counted: impl Fn(&ModeId) -> bool) -> (MixedState, f64) {
        let mut out: HashMap<Key, Complex64> = HashMap::default();
        let mut overflow = 0.0;
        for ((x, y), v) in &self.entries {
            for (f, p) in mixture {
                let x2 = x.union(f);
                let y2 = y.union(f);
                if x2.total_where(&counted) > self.n_max || y2.total_where(&counted) > self.n_max {
                    if x == y {
                        overflow += v.re * p;
                    }
                    continue;
                }
                *out.entry((x2, y2)).or_default() += v * *p;
            }
        }
        (self.rebuild(out), overflow)
    }

    /// Partial trace over every mode matching `pred`.
    pub fn trace_out(&self, pred: impl Fn(&ModeId) -> bool) -> MixedState {
        let mut out: HashMap<Key, Complex64> = HashMap::default();
        for ((x, y), v) in &self.entries {
            let (xt, xk) = x.partition(&pred);
            let (yt, yk) = y.partition(&pred);
            if xt == yt {
                *out.entry((xk, yk)).or_default() += v;
            }
        }
        self.rebuild(out)
    }

    /// Keeps only entries for which `keep(ket, bra)` holds.
    pub fn retain(&self, keep: impl Fn(&Occupation, &Occupation) -> bool) -> MixedState {
        let entries = self.entries.iter().filter(|((x, y), _)| keep(x, y)).map(|(k, v)| (k.clone(), *v)).collect();
        MixedState { entries, n_max: self.n_max }
    }

    /// Applies `f` to ket and bra of every entry and merges collisions.
    pub fn relabel(&self, f: impl Fn(&Occupation) -> Occupation) -> MixedState {
        let mut out: HashMap<Key, Complex64> = HashMap::default();
        for ((x, y), v) in &self.entries {
            *out.entry((f(x), f(y))).or_default() += v;
        }
        self.rebuild(out)
    }

    /// Removes entries with |ρ_xy| < eps². Returns the dropped diagonal weight.
    pub fn prune(&self, eps_amp: f64) -> (MixedState, f64) {
        let cut = eps_amp * eps_amp;
        let mut dropped = 0.0;
        let mut entries = BTreeMap::new();
        for ((x, y), v) in &self.entries {
            if v.norm() < cut {
                if x == y {
                    dropped += v.re;
                }
            } else {
                entries.insert((x.clone(), y.clone()), *v);
            }
        }
        (MixedState { entries, n_max: self.n_max }, dropped)
    }

    pub fn bins(&self) -> BTreeSet<i64> {
        self.entries
            .keys()
            .flat_map(|(x, y)| x.iter().chain(y.iter()))
            .filter(|(m, _)| !m.is_environment())
            .map(|(m, _)| m.time_bin)
            .collect()
    }

    /// Reduced photon-number state of the H output mode at `bin`.
    ///
    /// Same contract as [`FockState::partial_trace_to_bin`]. The matrix is not
    /// renormalized, so its trace equals the trace of `self`.
    pub fn partial_trace_to_bin(&self, bin: i64) -> Result<DensityMatrix> {
        if !self.bins().contains(&bin) {
            return Err(Error::UnknownBin(bin));
        }
        Ok(self.reduce_to_bin(bin))
    }

    /// Like [`Self::partial_trace_to_bin`] but an absent bin reads as vacuum.
    pub(crate) fn reduce_to_bin(&self, bin: i64) -> DensityMatrix {
        let dim = self.n_max as usize + 1;
        let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for ((x, y), v) in &self.entries {
            let (nx, rx) = split_bin(x, bin);
            let (ny, ry) = split_bin(y, bin);
            if rx == ry {
                let shift = rx.total_where(|m| crate::fock::is_bin_mode(m, bin));
                rho[((nx + shift) as usize, (ny + shift) as usize)] += v;
            }
        }
        DensityMatrix::from_matrix(rho)
    }

    fn rebuild(&self, map: HashMap<Key, Complex64>) -> MixedState {
        let entries = map.into_iter().filter(|(_, v)| v.norm_sqr() > 0.0).collect();
        MixedState { entries, n_max: self.n_max }
    }
}
