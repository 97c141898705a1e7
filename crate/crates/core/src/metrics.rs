//! Comparisons of an output-bin state against coherent and thermal references.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::DetectionParams;
use crate::density::{g2_from_pn, DensityMatrix};
use crate::error::{Error, Result};
use crate::fock::factorial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Coherent,
    Thermal,
}

/// Truncated reference state with the requested mean photon number
/// (before renormalization over the truncation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub kind: ReferenceKind,
    pub nbar: f64,
    pub n_max: usize,
    pub rho: DensityMatrix,
    /// Number-basis amplitudes of a pure reference (α taken real).
    pub amplitudes: Option<Vec<Complex64>>,
}

impl ReferenceState {
    pub fn coherent(nbar: f64, n_max: usize) -> Result<Self> {
        check_nbar(nbar)?;
        let alpha = nbar.sqrt();
        let raw: Vec<f64> = (0..=n_max).map(|n| alpha.powi(n as i32) / factorial(n as u32).sqrt()).collect();
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = raw.iter().map(|c| Complex64::new(c / norm, 0.0)).collect();
        Ok(ReferenceState {
            kind: ReferenceKind::Coherent,
            nbar,
            n_max,
            rho: DensityMatrix::pure(&amps),
            amplitudes: Some(amps),
        })
    }

    pub fn thermal(nbar: f64, n_max: usize) -> Result<Self> {
        check_nbar(nbar)?;
        let x = nbar / (1.0 + nbar);
        let raw: Vec<f64> = (0..=n_max).map(|n| x.powi(n as i32) / (1.0 + nbar)).collect();
        let total: f64 = raw.iter().sum();
        let pn: Vec<f64> = raw.iter().map(|p| p / total).collect();
        Ok(ReferenceState {
            kind: ReferenceKind::Thermal,
            nbar,
            n_max,
            rho: DensityMatrix::diagonal(&pn, n_max + 1),
            amplitudes: None,
        })
    }

    pub fn pn(&self) -> Vec<f64> {
        self.rho.photon_distribution()
    }
}

fn check_nbar(nbar: f64) -> Result<()> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::invalid(format!("mean photon number must be finite and non-negative, got {nbar}")));
    }
    Ok(())
}

/// Uhlmann fidelity (Tr√(√σ ρ √σ))², or ⟨ψ|ρ|ψ⟩ for a pure reference.
pub fn fidelity(rho: &DensityMatrix, reference: &ReferenceState) -> Result<f64> {
    let d = reference.rho.dimension();
    if rho.dimension() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho.dimension() });
    }
    if let Some(psi) = &reference.amplitudes {
        let v = nalgebra::DVector::from_column_slice(psi);
        let f = (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
        return Ok(f.clamp(0.0, 1.0));
    }
    let s = hermitian_sqrt(reference.rho.matrix());
    let inner = &s * rho.matrix() * &s;
    let inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let root_trace: f64 = inner.symmetric_eigenvalues().iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Σ_{i≠j} |ρ_ij|.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let n = m.nrows();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[(i, j)].norm()).sum()
}

/// Quadrature window and sample count per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerSpec {
    pub q_range: (f64, f64),
    pub p_range: (f64, f64),
    pub resolution: usize,
}

impl Default for WignerSpec {
    fn default() -> Self {
        WignerSpec { q_range: (-4.0, 4.0), p_range: (-4.0, 4.0), resolution: 161 }
    }
}

/// W(q,p) sampled on a rectangular grid; rows follow p, columns follow q.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    fn steps(&self) -> (f64, f64) {
        let dq = if self.q.len() > 1 { self.q[1] - self.q[0] } else { 0.0 };
        let dp = if self.p.len() > 1 { self.p[1] - self.p[0] } else { 0.0 };
        (dq, dp)
    }

    /// Riemann sum of W over the grid.
    pub fn integral(&self) -> f64 {
        let (dq, dp) = self.steps();
        self.values.iter().flatten().sum::<f64>() * dq * dp
    }

    /// (q, p, W) at the maximum.
    pub fn peak(&self) -> (f64, f64, f64) {
        let mut best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > best.2 {
                    best = (self.q[j], self.p[i], w);
                }
            }
        }
        best
    }

    pub fn minimum(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// ∫ W dp as a function of q.
    pub fn q_marginal(&self) -> Vec<f64> {
        let (_, dp) = self.steps();
        (0..self.q.len()).map(|j| self.values.iter().map(|row| row[j]).sum::<f64>() * dp).collect()
    }
}

/// Generalized Laguerre L_n^(k)(x) for n = 0..=n_max.
fn laguerre_table(n_max: usize, k: usize, x: f64) -> Vec<f64> {
    let k = k as f64;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max >= 1 {
        out.push(1.0 + k - x);
    }
    for j in 1..n_max {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * out[j] - (jf + k) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// W(q,p) at α = (q+ip)/√2, normalized so ∫∫ W dq dp = 1 and the vacuum
/// peaks at 1/π.
pub fn wigner_point(rho: &DensityMatrix, q: f64, p: f64) -> f64 {
    let d = rho.dimension();
    let alpha = Complex64::new(q, p) / 2f64.sqrt();
    let r2 = alpha.norm_sqr();
    let x = 4.0 * r2;
    let gauss = (-2.0 * r2).exp() / std::f64::consts::PI;
    let two_conj = 2.0 * alpha.conj();
    let mut total = 0.0;
    for k in 0..d {
        // |m⟩⟨n| with m = n + k
        let lag = laguerre_table(d - 1 - k, k, x);
        let pow = two_conj.powu(k as u32);
        for n in 0..d - k {
            let m = n + k;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let ratio = (factorial(n as u32) / factorial(m as u32)).sqrt();
            let w = pow * (sign * ratio * lag[n]);
            let rho_mn = rho.element(m, n);
            total += if k == 0 { (rho_mn * w).re } else { 2.0 * (rho_mn * w).re };
        }
    }
    gauss * total
}

pub fn wigner(rho: &DensityMatrix, spec: &WignerSpec) -> Result<WignerGrid> {
    if spec.resolution < 2 {
        return Err(Error::invalid("Wigner resolution must be at least 2"));
    }
    if !(spec.q_range.1 > spec.q_range.0) || !(spec.p_range.1 > spec.p_range.0) {
        return Err(Error::invalid("Wigner ranges must be increasing intervals"));
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let step = (hi - lo) / (spec.resolution - 1) as f64;
        (0..spec.resolution).map(|i| lo + i as f64 * step).collect()
    };
    let q = axis(spec.q_range);
    let p = axis(spec.p_range);
    let values = p.par_iter().map(|&pv| q.iter().map(|&qv| wigner_point(rho, qv, pv)).collect()).collect();
    Ok(WignerGrid { q, p, values })
}

/// Applies ρ → aρa†/Tr repeatedly. Entry 0 is the input distribution.
pub fn annihilation_test(rho: &DensityMatrix, repetitions: usize) -> Result<Vec<Vec<f64>>> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let d = rho.dimension();
    let mut cur = rho.normalized()?;
    let mut out = vec![cur.photon_distribution()];
    for _ in 0..repetitions {
        let m = cur.matrix();
        let next = DMatrix::from_fn(d, d, |i, j| {
            if i + 1 < d && j + 1 < d {
                m[(i + 1, j + 1)] * (((i + 1) * (j + 1)) as f64).sqrt()
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        cur = DensityMatrix::from_matrix(next).normalized()?;
        out.push(cur.photon_distribution());
    }
    Ok(out)
}

/// g²(0) of P(n) cut at each listed n_max and renormalized.
pub fn truncation_study(pn: &[f64], n_max_list: &[usize]) -> Result<Vec<(usize, f64)>> {
    let full = pn.len().saturating_sub(1);
    n_max_list
        .iter()
        .map(|&n| {
            if n < 1 || n > full {
                return Err(Error::invalid(format!("truncation {n} outside [1, {full}]")));
            }
            let cut = &pn[..=n];
            let total: f64 = cut.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroState);
            }
            let norm: Vec<f64> = cut.iter().map(|p| p / total).collect();
            Ok((n, g2_from_pn(&norm)))
        })
        .collect()
}

/// Rate of n-photon states: the input rate detected·2/η_d times P(n).
pub fn nphoton_rates(detected_hz: f64, d: &DetectionParams, pn: &[f64]) -> Result<Vec<f64>> {
    d.validate()?;
    if !(detected_hz > 0.0) {
        return Err(Error::invalid("detected rate must be positive"));
    }
    let total: f64 = pn.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroState);
    }
    let input = detected_hz * 2.0 / d.eta_d;
    Ok(pn.iter().map(|p| input * p / total).collect())
}

/// One row of the photon-number comparison table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberRow {
    pub n: usize,
    pub p_artificial: f64,
    pub p_coherent: f64,
    pub p_thermal: f64,
}

/// P(n) next to coherent and thermal references of equal n̄.
pub fn photon_number_table(pn: &[f64]) -> Result<Vec<PhotonNumberRow>> {
    let total: f64 = pn.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroState);
    }
    let norm: Vec<f64> = pn.iter().map(|p| p / total).collect();
    let nbar = crate::density::mean(&norm);
    let n_max = norm.len() - 1;
    let coh = ReferenceState::coherent(nbar, n_max)?.pn();
    let th = ReferenceState::thermal(nbar, n_max)?.pn();
    Ok((0..=n_max)
        .map(|n| PhotonNumberRow { n, p_artificial: norm[n], p_coherent: coh[n], p_thermal: th[n] })
        .collect())
}

/// ½ Σ |p − q|.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (get(p, i) - get(q, i)).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_vacuum_probabilities() {
        let c = ReferenceState::coherent(0.2, 20).unwrap();
        assert_abs_diff_eq!(c.pn()[0], (-0.2f64).exp(), epsilon = 1e-6);
        let t = ReferenceState::thermal(0.2, 20).unwrap();
        assert_abs_diff_eq!(t.pn()[0], 1.0 / 1.2, epsilon = 1e-6);
        assert!(ReferenceState::coherent(-1.0, 4).is_err());
    }

    #[test]
    fn g2_identities() {
        let c = ReferenceState::coherent(0.2, 20).unwrap();
        assert_abs_diff_eq!(c.rho.g2_zero(), 1.0, epsilon = 1e-9);
        let t = ReferenceState::thermal(0.2, 20).unwrap();
        assert_abs_diff_eq!(t.rho.g2_zero(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn vacuum_fidelity_with_coherent() {
        let c = ReferenceState::coherent(0.2, 12).unwrap();
        let vac = DensityMatrix::diagonal(&[1.0], 13);
        assert_abs_diff_eq!(fidelity(&vac, &c).unwrap(), (-0.2f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn self_fidelity_is_one() {
        let t = ReferenceState::thermal(0.3, 6).unwrap();
        assert_abs_diff_eq!(fidelity(&t.rho, &t).unwrap(), 1.0, epsilon = 1e-9);
        let c = ReferenceState::coherent(0.3, 6).unwrap();
        assert_abs_diff_eq!(fidelity(&c.rho, &c).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_dimension() {
        let c = ReferenceState::coherent(0.2, 4).unwrap();
        let rho = DensityMatrix::diagonal(&[1.0], 3);
        assert!(matches!(fidelity(&rho, &c), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn thermal_has_no_coherence() {
        let t = ReferenceState::thermal(0.2, 8).unwrap();
        assert_eq!(l1_coherence(&t.rho), 0.0);
    }

    #[test]
    fn coherent_l1_matches_amplitudes() {
        let c = ReferenceState::coherent(0.2, 8).unwrap();
        let amps: Vec<f64> = c.amplitudes.as_ref().unwrap().iter().map(|z| z.re).collect();
        let s: f64 = amps.iter().sum();
        let s2: f64 = amps.iter().map(|a| a * a).sum();
        assert_abs_diff_eq!(l1_coherence(&c.rho), s * s - s2, epsilon = 1e-12);
    }

    #[test]
    fn vacuum_wigner_peak() {
        let vac = DensityMatrix::diagonal(&[1.0], 1);
        assert_abs_diff_eq!(wigner_point(&vac, 0.0, 0.0), 1.0 / std::f64::consts::PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wigner_point(&vac, 1.0, 0.5), (-1.25f64).exp() / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn fock_one_is_negative_at_origin() {
        let one = DensityMatrix::diagonal(&[0.0, 1.0], 2);
        assert_abs_diff_eq!(wigner_point(&one, 0.0, 0.0), -1.0 / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn coherent_peak_sits_at_sqrt_two_alpha() {
        let c = ReferenceState::coherent(0.2, 12).unwrap();
        let spec = WignerSpec { q_range: (-1.0, 2.0), p_range: (-1.5, 1.5), resolution: 301 };
        let g = wigner(&c.rho, &spec).unwrap();
        let (q, p, w) = g.peak();
        assert_abs_diff_eq!(q, 0.4f64.sqrt(), epsilon = 0.01);
        assert_abs_diff_eq!(p, 0.0, epsilon = 0.01);
        assert_abs_diff_eq!(w, 1.0 / std::f64::consts::PI, epsilon = 1e-4);
    }

    #[test]
    fn imaginary_amplitude_moves_peak_to_p() {
        // |β⟩ with β = i·0.5: peak at p = √2·0.5
        let b = Complex64::new(0.0, 0.5);
        let amps: Vec<Complex64> =
            (0..12).map(|n| (-b.norm_sqr() / 2.0).exp() * b.powu(n) / factorial(n).sqrt()).collect();
        let rho = DensityMatrix::pure(&amps);
        let target = 2f64.sqrt() * 0.5;
        assert!(wigner_point(&rho, 0.0, target) > wigner_point(&rho, 0.0, -target) + 0.1);
        assert_abs_diff_eq!(wigner_point(&rho, 0.0, target), 1.0 / std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn annihilation_on_thermal() {
        let nbar = 0.2;
        let t = ReferenceState::thermal(nbar, 30).unwrap();
        let steps = annihilation_test(&t.rho, 1).unwrap();
        let x = nbar / (1.0 + nbar);
        for n in 0..10 {
            let expect = (n as f64 + 1.0) * (1.0 - x).powi(2) * x.powi(n as i32);
            assert_abs_diff_eq!(steps[1][n], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn annihilating_vacuum_fails() {
        let vac = DensityMatrix::diagonal(&[1.0], 3);
        assert!(matches!(annihilation_test(&vac, 1), Err(Error::ZeroState)));
    }

    #[test]
    fn truncation_endpoints() {
        let c = ReferenceState::coherent(0.4, 8).unwrap().pn();
        let s = truncation_study(&c, &[1, 8]).unwrap();
        assert_eq!(s[0].1, 0.0);
        assert_abs_diff_eq!(s[1].1, g2_from_pn(&c), epsilon = 1e-12);
        assert!(truncation_study(&c, &[9]).is_err());
    }

    #[test]
    fn single_photon_has_no_multiphoton_rate() {
        let r = nphoton_rates(150e3, &DetectionParams::default(), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(r[1] > 0.0);
        assert!(r[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn table_uses_matched_mean() {
        let rows = photon_number_table(&[0.8, 0.2]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].p_coherent > 0.0 && rows[0].p_thermal > rows[0].p_coherent);
    }
}
