//! Simulation of a single-photon stream interfering with its own delayed
//! copy in a lossy polarization delay loop.
//!
//! Layers, bottom to top:
//!
//! * [`fock`], [`mixed`], [`density`]: sparse bosonic states and reduced density matrices.
//! * [`elements`]: waveplates, loss, PBS routing, diffraction overlap.
//! * [`engine`]: round-trip propagation and output-bin statistics.
//! * [`correlations`]: closed-form g²(τ) models, a two-photon oracle, IRF convolution.
//! * [`metrics`]: fidelity, coherence, Wigner function and related state diagnostics.
//! * [`histogram`], [`fit`], [`sweep`], [`config`], [`export`]: data handling for the CLI.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod correlations;
pub mod density;
pub mod elements;
pub mod engine;
pub mod error;
pub mod export;
pub mod fit;
pub mod fock;
pub mod histogram;
pub mod metrics;
pub mod mixed;
pub mod sweep;
pub mod tolerances;

pub use error::{Error, Result};
