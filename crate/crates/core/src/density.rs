//! Single-mode density matrices in the photon-number basis.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{HERMITIAN_TOL, PSD_TOL, TRACE_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixRepr", try_from = "MatrixRepr")]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
}

/// Row-major real and imaginary parts, as written to JSON.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for MatrixRepr {
    fn from(d: DensityMatrix) -> Self {
        let n = d.dimension();
        let row = |f: fn(&Complex64) -> f64, i: usize| (0..n).map(|j| f(&d.elements[(i, j)])).collect();
        MatrixRepr {
            re: (0..n).map(|i| row(|z| z.re, i)).collect(),
            im: (0..n).map(|i| row(|z| z.im, i)).collect(),
        }
    }
}

impl TryFrom<MatrixRepr> for DensityMatrix {
    type Error = String;

    fn try_from(r: MatrixRepr) -> std::result::Result<Self, String> {
        let n = r.re.len();
        if r.im.len() != n || r.re.iter().chain(&r.im).any(|row| row.len() != n) {
            return Err("density matrix must be square with matching re/im parts".into());
        }
        Ok(DensityMatrix { elements: DMatrix::from_fn(n, n, |i, j| Complex64::new(r.re[i][j], r.im[i][j])) })
    }
}

impl DensityMatrix {
    /// Wraps a square matrix without validation; see [`DensityMatrix::validate`].
    pub fn from_matrix(elements: DMatrix<Complex64>) -> Self {
        assert!(elements.is_square(), "density matrix must be square");
        DensityMatrix { elements }
    }

    /// Diagonal state with the given populations, padded to `dim`.
    pub fn diagonal(pn: &[f64], dim: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for (i, &p) in pn.iter().enumerate().take(dim) {
            m[(i, i)] = Complex64::new(p, 0.0);
        }
        DensityMatrix { elements: m }
    }

    /// |ψ⟩⟨ψ| for an amplitude vector.
    pub fn pure(amps: &[Complex64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(amps);
        DensityMatrix { elements: &v * v.adjoint() }
    }

    pub fn dimension(&self) -> usize {
        self.elements.nrows()
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.elements[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..self.dimension()).map(|i| self.elements[(i, i)].re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        mean(&self.photon_distribution())
    }

    pub fn g2_zero(&self) -> f64 {
        g2_from_pn(&self.photon_distribution())
    }

    /// Same state divided by its trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::ZeroState);
        }
        Ok(DensityMatrix { elements: &self.elements / Complex64::new(t, 0.0) })
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.elements + self.elements.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.elements - self.elements.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Checks Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::invalid(format!("density matrix trace {tr}")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::invalid(format!("density matrix eigenvalue {min:.2e}")));
        }
        Ok(())
    }
}

pub fn mean(pn: &[f64]) -> f64 {
    pn.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// Σ n(n−1)P(n) / n̄². Returns 0 when n̄ = 0.
pub fn g2_from_pn(pn: &[f64]) -> f64 {
    let nbar = mean(pn);
    if nbar == 0.0 {
        return 0.0;
    }
    let second: f64 = pn.iter().enumerate().map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p).sum();
    second / (nbar * nbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fock_one_has_zero_g2() {
        assert_eq!(g2_from_pn(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn diagonal_state_validates() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.2, 0.1], 4);
        rho.validate().unwrap();
        assert_abs_diff_eq!(rho.mean_photon_number(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn negative_population_is_rejected() {
        let rho = DensityMatrix::diagonal(&[1.1, -0.1], 2);
        assert!(rho.validate().is_err());
    }

    #[test]
    fn pure_superposition_eigenvalues() {
        let s = Complex64::new(0.5f64.sqrt(), 0.0);
        let rho = DensityMatrix::pure(&[s, s]);
        let ev = rho.eigenvalues();
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-14);
    }
}
