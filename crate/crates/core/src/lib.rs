//! Entanglement swapping between two quantum-dot entangled-photon sources
//! whose physical parameters are drawn from device populations.
//!
//! Module map:
//! - [`polarization`]: kets, density matrices, Bell projections, fidelity
//! - [`cascade`]: single-source pair state, coherence, indistinguishability
//! - [`swap`]: four-photon swapping, closed-form and sampled fidelity
//! - [`device_stats`]: truncated Gaussians, fitting, resonance probability
//! - [`scenarios`]: tuning mechanisms and the preset scenario ladder
//! - [`mc`]: seeded population Monte Carlo and fidelity histograms
//! - [`tomography`]: coincidence simulation and linear-inversion tomography

// `!(x > 0.0)` is used throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod device_stats;
pub mod error;
pub mod mc;
pub mod polarization;
pub mod rng;
pub mod scenarios;
pub mod swap;
pub mod tomography;

pub use cascade::{QdParams, PHYS};
pub use error::{Error, Result};
pub use polarization::{BellKind, DensityMatrix, Ket};
