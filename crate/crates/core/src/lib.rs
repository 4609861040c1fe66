//! Steady-state Gaussian entanglement in a driven atom–cavity–phonon–magnon
//! system.
//!
//! The pipeline runs from a unit-tagged [`PhysicalParams`] through the
//! classical [`SteadyState`], the linearized drift and diffusion matrices and
//! the Lyapunov covariance matrix, to bipartite logarithmic negativities.
//! [`experiments`] sweeps it over parameter grids.

pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod linear;
pub mod params;
pub mod steady;

pub use entanglement::{log_negativity, reduced_cm, symplectic_eigenvalues, BipartiteCM, Mode, ModePair};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use linear::{
    build_diffusion, build_drift, evolve_cm, is_stable, solve_lyapunov, CovarianceMatrix, DiffusionMatrix,
    DriftMatrix, DriftParameters,
};
pub use params::{Frequency, PhysicalParams, ValidatedModel};
pub use steady::{excitation_numbers, solve_steady_state, ExcitationReport, SteadyState};
