//! Least-squares fit of the IRF-convolved three-level model to a measured
//! g²(τ) curve.
//!
//! The optimizer is a small damped Gauss-Newton loop (Levenberg-Marquardt
//! with Marquardt diagonal scaling) on a central-difference Jacobian. Three
//! parameters do not justify an external solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correlations::{g2_three_level, irf_convolve, CorrelationCurve, CorrelationKind, DetectionParams, SourceParams};
use crate::error::{Error, Result};
use crate::tolerances::{FIT_DEGENERATE_CONDITION, FIT_JACOBIAN_STEP, FIT_MAX_ITER, FIT_RESIDUAL_RTOL};

/// Smallest admissible lifetime in ns; keeps the model finite.
const MIN_LIFETIME_NS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub ssr: f64,
    pub iterations: usize,
    pub jacobian: DMatrix<f64>,
    /// Condition number of the column-scaled normal matrix.
    pub condition: f64,
}

fn jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], lower: &[f64], m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let h = FIT_JACOBIAN_STEP * x[k].abs().max(1e-3);
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[k] += h;
        lo[k] -= h;
        let (plus, minus, width) = if lo[k] < lower[k] {
            (f(&hi), f(x), h)
        } else {
            (f(&hi), f(&lo), 2.0 * h)
        };
        for i in 0..m {
            j[(i, k)] = (plus[i] - minus[i]) / width;
        }
    }
    j
}

/// Condition number of DᵀJᵀJD with D scaling every column to unit norm.
/// Infinite when a column vanishes.
fn scaled_condition(jtj: &DMatrix<f64>) -> f64 {
    let n = jtj.nrows();
    let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)].sqrt()).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return f64::INFINITY;
    }
    let s = DMatrix::from_fn(n, n, |i, k| jtj[(i, k)] / (d[i] * d[k]));
    let ev = s.symmetric_eigenvalues();
    let max = ev.iter().copied().fold(f64::MIN, f64::max);
    let min = ev.iter().copied().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimizes Σ r(x)² subject to x ≥ `lower` (by projection).
///
/// Stops when an accepted step changes the residual sum by less than
/// `FIT_RESIDUAL_RTOL` relative, or when no damping yields a decrease.
pub fn levenberg_marquardt(f: &dyn Fn(&[f64]) -> Vec<f64>, x0: &[f64], lower: &[f64]) -> Result<LmOutcome> {
    let mut x: Vec<f64> = x0.iter().zip(lower).map(|(v, l)| v.max(*l)).collect();
    let mut r = f(&x);
    let m = r.len();
    if m < x.len() {
        return Err(Error::invalid("fewer data points than parameters"));
    }
    let mut cost = ssr(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut done = false;
    while iterations < FIT_MAX_ITER {
        iterations += 1;
        let j = jacobian(f, &x, lower, m);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..x.len() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).zip(lower).map(|((v, s), l)| (v + s).max(*l)).collect();
            let rt = f(&trial);
            let ct = ssr(&rt);
            if ct.is_finite() && ct <= cost {
                let change = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                done = change < FIT_RESIDUAL_RTOL || cost == 0.0;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            done = true;
        }
        if done {
            break;
        }
    }
    let jacobian = jacobian(f, &x, lower, m);
    let condition = scaled_condition(&(jacobian.transpose() * &jacobian));
    if !done {
        if condition > FIT_DEGENERATE_CONDITION {
            return Err(Error::DegenerateJacobian { condition });
        }
        return Err(Error::NonConvergence { iterations });
    }
    Ok(LmOutcome { params: x, ssr: cost, iterations, jacobian, condition })
}

/// The three-level model convolved with the IRF and sampled at `taus`.
///
/// Evaluated on a grid of FWHM/20 extending 5 FWHM past the data, then
/// interpolated linearly.
pub fn convolved_three_level(taus: &[f64], p: &SourceParams, d: &DetectionParams) -> Result<Vec<f64>> {
    if d.irf_fwhm == 0.0 || taus.is_empty() {
        return Ok(taus.iter().map(|&t| g2_three_level(t, p)).collect());
    }
    let pad = 5.0 * d.irf_fwhm;
    let step = d.irf_fwhm / 20.0;
    let fine = CorrelationCurve::sample(taus[0] - pad, taus[taus.len() - 1] + pad, step, CorrelationKind::VV, |t| {
        g2_three_level(t, p)
    });
    let conv = irf_convolve(&fine, d)?;
    Ok(taus.iter().map(|&t| conv.value_at(t)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SourceParams,
    /// Covariance over (a, τ_r, τ_B).
    pub covariance: [[f64; 3]; 3],
    /// Sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
    pub condition: f64,
}

impl FitResult {
    /// One-sigma uncertainties of (a, τ_r, τ_B).
    pub fn std_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }
}

/// Fits (a, τ_r, τ_B) to `curve`. A degenerate Jacobian at the optimum is
/// an error since the covariance would be meaningless.
pub fn fit_three_level(curve: &CorrelationCurve, d: &DetectionParams, init: &SourceParams) -> Result<FitResult> {
    init.validate()?;
    d.validate()?;
    if curve.len() < 4 {
        return Err(Error::invalid("need at least four points to fit three parameters"));
    }
    let model = |x: &[f64]| -> Vec<f64> {
        let p = SourceParams::from_array([x[0], x[1], x[2]]);
        match convolved_three_level(&curve.taus, &p, d) {
            Ok(v) => v.iter().zip(&curve.values).map(|(m, y)| m - y).collect(),
            Err(_) => vec![f64::NAN; curve.len()],
        }
    };
    // surface grid problems before the optimizer sees NaNs
    convolved_three_level(&curve.taus, init, d)?;
    let lower = [0.0, MIN_LIFETIME_NS, MIN_LIFETIME_NS];
    let out = levenberg_marquardt(&model, &init.as_array(), &lower)?;
    if out.condition > FIT_DEGENERATE_CONDITION {
        return Err(Error::DegenerateJacobian { condition: out.condition });
    }
    let dof = (curve.len() - 3) as f64;
    let s2 = out.ssr / dof;
    let jtj = out.jacobian.transpose() * &out.jacobian;
    let inv = jtj.try_inverse().ok_or(Error::DegenerateJacobian { condition: f64::INFINITY })?;
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (k, c) in row.iter_mut().enumerate() {
            *c = s2 * inv[(i, k)];
        }
    }
    Ok(FitResult {
        params: SourceParams::from_array([out.params[0], out.params[1], out.params[2]]),
        covariance,
        residual: out.ssr,
        iterations: out.iterations,
        condition: out.condition,
    })
}
