//! Closed-form second-order correlation functions.
//!
//! The source is a three-level emitter (antibunching on τ_r, blinking on
//! τ_B with amplitude a). The loop imprints dips at multiples of the round
//! trip delay R whose depths follow geometric series in q = η_L/2.

use serde::{Deserialize, Serialize};

use crate::elements::LoopParams;
use crate::error::{Error, Result};
use crate::tolerances::{BASELINE_TOL, SERIES_CUTOFF};

/// Emitter parameters. Times in ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceParams {
    pub tau_r: f64,
    pub tau_b: f64,
    pub a: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams { tau_r: 0.13, tau_b: 5.2, a: 0.24 }
    }
}

impl SourceParams {
    /// Near-ideal emitter: no blinking and a lifetime short enough that
    /// neighbouring dips do not overlap.
    pub fn ideal() -> Self {
        SourceParams { tau_r: 1e-3, tau_b: 1.0, a: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_r > 0.0) || !(self.tau_b > 0.0) {
            return Err(Error::invalid("tau_r and tau_b must be positive"));
        }
        if !(self.a >= 0.0) {
            return Err(Error::invalid("bunching amplitude a must be non-negative"));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.tau_r, self.tau_b]
    }

    pub fn from_array(p: [f64; 3]) -> Self {
        SourceParams { a: p[0], tau_r: p[1], tau_b: p[2] }
    }
}

/// Detector parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionParams {
    /// Gaussian timing jitter FWHM in ns.
    pub irf_fwhm: f64,
    /// Single-photon detection efficiency.
    pub eta_d: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        // APD efficiency 25 % times fibre coupling 90 %
        DetectionParams { irf_fwhm: 0.523, eta_d: 0.25 * 0.9 }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.irf_fwhm >= 0.0) {
            return Err(Error::invalid("irf_fwhm must be non-negative"));
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::invalid("eta_d must lie in (0,1]"));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.irf_fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationKind {
    VV,
    VH,
    HH,
}

impl std::str::FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "VV" => Ok(CorrelationKind::VV),
            "VH" => Ok(CorrelationKind::VH),
            "HH" => Ok(CorrelationKind::HH),
            _ => Err(Error::invalid(format!("unknown correlation kind '{s}'"))),
        }
    }
}

/// Sampled g²(τ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CorrelationKind,
    pub convolved: bool,
}

impl CorrelationCurve {
    pub fn new(taus: Vec<f64>, values: Vec<f64>, kind: CorrelationKind) -> Result<Self> {
        if taus.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: taus.len(), got: values.len() });
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("curve delays must be strictly increasing"));
        }
        Ok(CorrelationCurve { taus, values, kind, convolved: false })
    }

    /// Samples `f` on a uniform grid from `start` to `end` inclusive.
    pub fn sample(start: f64, end: f64, step: f64, kind: CorrelationKind, f: impl Fn(f64) -> f64) -> Self {
        let n = ((end - start) / step).round() as usize + 1;
        let taus: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
        let values = taus.iter().map(|&t| f(t)).collect();
        CorrelationCurve { taus, values, kind, convolved: false }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Grid spacing if the delays are uniform to 1e-9 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.taus.len() < 2 {
            return None;
        }
        let step = (self.taus[self.len() - 1] - self.taus[0]) / (self.len() - 1) as f64;
        let ok = self.taus.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
        ok.then_some(step)
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn value_at(&self, tau: f64) -> f64 {
        let n = self.len();
        if tau <= self.taus[0] {
            return self.values[0];
        }
        if tau >= self.taus[n - 1] {
            return self.values[n - 1];
        }
        let i = self.taus.partition_point(|&t| t <= tau) - 1;
        let w = (tau - self.taus[i]) / (self.taus[i + 1] - self.taus[i]);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// (τ, g²) at the smallest value.
    pub fn minimum(&self) -> (f64, f64) {
        self.taus
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| (t, v))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((f64::NAN, f64::NAN))
    }

    /// True when both ends sit at 1 within the baseline tolerance.
    pub fn has_unit_baseline(&self) -> bool {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => (a - 1.0).abs() <= BASELINE_TOL && (b - 1.0).abs() <= BASELINE_TOL,
            _ => false,
        }
    }
}

/// Three-level emitter: 1 − (1+a)e^(−|τ|/τ_r) + a e^(−|τ|/τ_B).
pub fn g2_three_level(tau: f64, p: &SourceParams) -> f64 {
    let t = tau.abs();
    1.0 - (1.0 + p.a) * (-t / p.tau_r).exp() + p.a * (-t / p.tau_b).exp()
}

/// Terms q^m of a dip series, m = 1, 2, ..., stopping below the cutoff.
fn dip_weights(eta_l: f64) -> impl Iterator<Item = (i32, f64)> {
    let q = eta_l / 2.0;
    (1..).map(move |m| (m, q.powi(m))).take_while(|&(_, w)| w >= SERIES_CUTOFF)
}

/// Prefactor 2η/(4−η²) of the HH dip series.
pub fn hh_prefactor(eta_l: f64) -> f64 {
    2.0 * eta_l / (4.0 - eta_l * eta_l)
}

/// Two-photon value of g²_HH(0) for fully distinguishable photons.
pub fn hh_zero_distinguishable(eta_l: f64) -> f64 {
    1.0 - hh_prefactor(eta_l)
}

/// Cross-polarized correlation between the direct V output and the loop H
/// output: dips only at τ = +mR.
pub fn g2_vh(tau: f64, p: &SourceParams, lp: &LoopParams) -> f64 {
    let r = lp.round_trip_ns;
    1.0 - dip_weights(lp.eta_l).map(|(m, w)| w * (1.0 - g2_three_level(tau - f64::from(m) * r, p))).sum::<f64>()
}

/// Loop-output autocorrelation with dips at τ = ±mR and a central dip set
/// by `g2_hh_zero`.
pub fn g2_hh(tau: f64, p: &SourceParams, lp: &LoopParams, g2_hh_zero: f64) -> f64 {
    let r = lp.round_trip_ns;
    let series: f64 = dip_weights(lp.eta_l)
        .map(|(m, w)| {
            let s = f64::from(m) * r;
            w * ((1.0 - g2_three_level(tau - s, p)) + (1.0 - g2_three_level(tau + s, p)))
        })
        .sum();
    1.0 - hh_prefactor(lp.eta_l) * series - (1.0 - g2_hh_zero) * (1.0 - g2_three_level(tau, p))
}

/// Closed-form VH dip depth at τ = mR for an ideal emitter, m ≥ 1.
pub fn vh_dip(m: u32, eta_l: f64) -> f64 {
    1.0 - (eta_l / 2.0).powi(m as i32)
}

/// Closed-form HH dip depth at τ = mR for an ideal emitter and distinguishable photons.
pub fn hh_dip(m: i32, eta_l: f64) -> f64 {
    1.0 - hh_prefactor(eta_l) * (eta_l / 2.0).powi(m.abs())
}

/// Dip values from explicit two-photon enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDips {
    /// g²_VH(mR) for m = 1..=m_max (index 0 is m = 1).
    pub vh: Vec<f64>,
    /// g²_HH(mR) for m = 0..=m_max.
    pub hh: Vec<f64>,
}

/// Brute-force two-photon enumeration of the loop dips.
///
/// A photon that enters the loop leaves through H after r ≥ 1 round trips
/// with probability w_r = (η_L/2)^r. Two source photons emitted Δt = j·R
/// apart (j ≠ 0, since the emitter holds one excitation) and leaving after
/// r₁ and r₂ trips arrive (j + r₂ − r₁)·R apart. The dip at mR is the weight
/// of the excluded j = 0 pairs, summed over both photon orders, relative to
/// the loss-free emission probability N₀ = Σ 2^(−r).
///
/// For VH, the V photon is detected directly, and the H event at +mR loses
/// the contribution of the same photon leaving after m trips.
pub fn two_photon_oracle(lp: &LoopParams, r_max: u32, m_max: u32) -> Result<OracleDips> {
    if r_max < 2 {
        return Err(Error::invalid("r_max must be at least 2"));
    }
    let rm = r_max as i64;
    let w = |r: i64| (lp.eta_l / 2.0).powi(r as i32);
    let n0: f64 = (1..=rm).map(|r| 0.5f64.powi(r as i32)).sum();

    // excluded[m]: weight of the forbidden j = 0 pairs with |r2 − r1| = m;
    // ordered (r1, r2) covers both photon orders
    let mut excluded = vec![0.0; m_max as usize + 1];
    for r1 in 1..=rm {
        for r2 in 1..=rm {
            let d = (r2 - r1).unsigned_abs() as usize;
            if d <= m_max as usize {
                excluded[d] += w(r1) * w(r2);
            }
        }
    }
    let hh = (0..=m_max as usize)
        .map(|m| {
            // r1 = r2 pairs appear once in the ordered sum but twice in the swap
            let ex = if m == 0 { 2.0 * excluded[0] } else { excluded[m] };
            1.0 - ex / (n0 * n0)
        })
        .collect();
    let vh = (1..=i64::from(m_max)).map(|m| 1.0 - if m <= rm { w(m) / n0 } else { 0.0 }).collect();
    Ok(OracleDips { vh, hh })
}

/// Convolution with a unit-area Gaussian of the detector FWHM.
///
/// The curve is padded by reflection about its end points and the kernel
/// extends ±5 FWHM. Requires a uniform grid no coarser than FWHM/10.
pub fn irf_convolve(curve: &CorrelationCurve, d: &DetectionParams) -> Result<CorrelationCurve> {
    d.validate()?;
    if d.irf_fwhm == 0.0 {
        return Ok(CorrelationCurve { convolved: true, ..curve.clone() });
    }
    let step = curve.uniform_step().ok_or(Error::NonUniformGrid)?;
    let limit = d.irf_fwhm / 10.0;
    if step > limit * (1.0 + 1e-9) {
        return Err(Error::GridTooCoarse { step, limit });
    }
    let sigma = d.sigma();
    let half = (5.0 * d.irf_fwhm / step).ceil() as usize;
    let mut kernel: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let x = (k as f64 - half as f64) * step;
            (-0.5 * (x / sigma).powi(2)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let n = curve.len() as i64;
    let at = |i: i64| -> f64 {
        // reflection about the end samples
        let mut j = i;
        while j < 0 || j >= n {
            if j < 0 {
                j = -j;
            }
            if j >= n {
                j = 2 * (n - 1) - j;
            }
        }
        curve.values[j as usize]
    };
    let values = (0..n)
        .map(|i| kernel.iter().enumerate().map(|(k, w)| w * at(i + k as i64 - half as i64)).sum())
        .collect();
    Ok(CorrelationCurve { taus: curve.taus.clone(), values, kind: curve.kind, convolved: true })
}

/// g²(τ) of the requested kind on a uniform grid.
///
/// VV is the bare emitter. HH needs the central value `g2_hh_zero`.
pub fn model_curve(
    kind: CorrelationKind,
    p: &SourceParams,
    lp: &LoopParams,
    g2_hh_zero: f64,
    range_ns: (f64, f64),
    step_ns: f64,
) -> CorrelationCurve {
    let (lo, hi) = range_ns;
    match kind {
        CorrelationKind::VV => CorrelationCurve::sample(lo, hi, step_ns, kind, |t| g2_three_level(t, p)),
        CorrelationKind::VH => CorrelationCurve::sample(lo, hi, step_ns, kind, |t| g2_vh(t, p, lp)),
        CorrelationKind::HH => CorrelationCurve::sample(lo, hi, step_ns, kind, |t| g2_hh(t, p, lp, g2_hh_zero)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_level_limits() {
        let p = SourceParams::default();
        assert_eq!(g2_three_level(0.0, &p), 0.0);
        assert_abs_diff_eq!(g2_three_level(1e4, &p), 1.0, epsilon = 1e-15);
        let expect = 1.0 - 1.24 * (-1.0f64 / 0.13).exp() + 0.24 * (-1.0f64 / 5.2).exp();
        assert_abs_diff_eq!(g2_three_level(1.0, &p), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(g2_three_level(1.0, &p), 1.1974, epsilon = 5e-4);
    }

    #[test]
    fn vh_dip_at_one_round_trip() {
        let lp = LoopParams::default();
        let v = g2_vh(lp.round_trip_ns, &SourceParams::ideal(), &lp);
        assert_abs_diff_eq!(v, 0.55, epsilon = 1e-12);
    }

    #[test]
    fn vh_has_no_dips_before_zero() {
        let lp = LoopParams::default();
        let p = SourceParams::default();
        let v = g2_vh(-lp.round_trip_ns, &p, &lp);
        // only the tails of the positive dips and no structure of its own
        assert!(v > 0.99, "{v}");
    }

    #[test]
    fn hh_with_unit_centre_has_no_central_dip() {
        let lp = LoopParams::default();
        let p = SourceParams::ideal();
        assert_abs_diff_eq!(g2_hh(0.0, &p, &lp, 1.0), 1.0, epsilon = 1e-12);
        assert!(g2_hh(lp.round_trip_ns, &p, &lp, 1.0) < 0.8);
    }

    #[test]
    fn hh_zero_value() {
        assert_abs_diff_eq!(hh_zero_distinguishable(0.9), 1.0 - 1.8 / 3.19, epsilon = 1e-15);
        assert_abs_diff_eq!(hh_zero_distinguishable(0.9), 0.4357, epsilon = 1e-4);
    }

    #[test]
    fn series_truncation_is_invisible() {
        let lp = LoopParams::lossless();
        let full: f64 = (1..200).map(|m| 0.5f64.powi(m)).sum();
        let cut: f64 = dip_weights(lp.eta_l).map(|(_, w)| w).sum();
        assert!((full - cut).abs() < 1e-10);
    }

    #[test]
    fn grid_checks() {
        let c = CorrelationCurve::sample(-5.0, 5.0, 0.1, CorrelationKind::VV, |_| 1.0);
        let d = DetectionParams::default();
        assert!(matches!(irf_convolve(&c, &d), Err(Error::GridTooCoarse { .. })));
        let bumpy = CorrelationCurve::new(vec![0.0, 0.01, 0.03], vec![1.0; 3], CorrelationKind::VV).unwrap();
        assert!(matches!(irf_convolve(&bumpy, &d), Err(Error::NonUniformGrid)));
    }

    #[test]
    fn zero_width_irf_is_identity() {
        let c = CorrelationCurve::sample(-1.0, 1.0, 0.5, CorrelationKind::VV, |t| t * t);
        let out = irf_convolve(&c, &DetectionParams { irf_fwhm: 0.0, eta_d: 0.5 }).unwrap();
        assert_eq!(out.values, c.values);
        assert!(out.convolved);
    }

    #[test]
    fn convolution_keeps_baseline() {
        let c = CorrelationCurve::sample(-20.0, 20.0, 0.01, CorrelationKind::VV, |_| 1.0);
        let out = irf_convolve(&c, &DetectionParams::default()).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn convolved_gaussian_width_adds_in_quadrature() {
        // a narrow Gaussian dip keeps its area and widens by the IRF
        let s0: f64 = 0.2;
        let c = CorrelationCurve::sample(-10.0, 10.0, 0.005, CorrelationKind::VV, |t| (-0.5 * (t / s0).powi(2)).exp());
        let d = DetectionParams::default();
        let out = irf_convolve(&c, &d).unwrap();
        let s = (s0 * s0 + d.sigma().powi(2)).sqrt();
        assert_abs_diff_eq!(out.value_at(0.0), s0 / s, epsilon = 1e-6);
    }

    #[test]
    fn interpolation_and_minimum() {
        let c = CorrelationCurve::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], CorrelationKind::HH).unwrap();
        assert_eq!(c.value_at(0.5), 0.5);
        assert_eq!(c.minimum(), (1.0, 0.0));
        assert!(CorrelationCurve::new(vec![0.0, 0.0], vec![1.0, 1.0], CorrelationKind::HH).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("hh".parse::<CorrelationKind>().unwrap(), CorrelationKind::HH);
        assert!("xy".parse::<CorrelationKind>().is_err());
    }
}
