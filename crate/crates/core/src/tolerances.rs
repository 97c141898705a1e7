//! Numerical tolerances shared by validation code and tests.
//!
//! Keeping them in one place makes it obvious which checks are physics
//! (pinned by the model) and which are floating-point housekeeping.

/// Maximum |ρ − ρ†| element for a valid density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Allowed deviation of Tr ρ from 1.
pub const TRACE_TOL: f64 = 1e-9;

/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

/// Norm drift allowed across a unitary element.
pub const UNITARITY_TOL: f64 = 1e-9;

/// Engine steady state: both |Δn̄| and |Δg²(0)| between consecutive trips.
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// Dip series are cut once a term falls below this magnitude.
pub const SERIES_CUTOFF: f64 = 1e-12;

/// Fit: stop when the relative change of the residual drops below this.
pub const FIT_RESIDUAL_RTOL: f64 = 1e-10;

/// Fit: relative step of the central-difference Jacobian.
pub const FIT_JACOBIAN_STEP: f64 = 1e-6;

/// Fit: iteration cap.
pub const FIT_MAX_ITER: usize = 200;

/// Fit: JᵀJ condition number above which the problem is called degenerate.
pub const FIT_DEGENERATE_CONDITION: f64 = 1e12;

/// Curves must reach 1 at both extremes within this margin.
pub const BASELINE_TOL: f64 = 0.02;
