//! Multi-particle lattice Hamiltonians with power-law hopping, and numerical
//! diagnostics for the multi-scale analysis of their Green's functions.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: lattice points, n-particle cubes, separability, clusters;
//! - [`model`]: disorder laws, potentials, Hamiltonian assembly;
//! - [`spectral`]: eigenpairs, Green's functions, the weighted norm, classification;
//! - [`schedule`]: the exponent schedule and its constraint checks;
//! - [`stochastics`]: Monte-Carlo probability estimates and the coupling probe;
//! - [`decay`]: eigenfunction decay fits and the Poisson-identity check.

// `!(x > 0.0)` style guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod error;
pub mod geometry;
pub mod lattice_sums;
pub mod model;
pub mod schedule;
pub mod spectral;
pub mod stochastics;

pub use error::{Error, Result};
pub use geometry::{Cube, LatticePoint, SiteBox};
pub use model::{assemble, DiagonalHopping, DisorderKind, DisorderSpec, HamiltonianMatrix, ModelParams, PotentialField};
pub use schedule::{derive_schedule, validate, Schedule, ScheduleInputs, ScheduleMode};
pub use spectral::{classify, eigenpairs, green, CubeClassification, NormProfile, SpectralTolerances, SpectrumReport};
pub use decay::{decay_table, fit_power_exponent, localization_center, poisson_residual, DecayFit, DecayTable, FitOptions, PoissonCheck};
pub use stochastics::{EnsembleResult, McOptions, Verdict};
