//! Pseudo-transient solvers for the nonlinear Poisson–Boltzmann equation.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: uniform grids, node fields, error norms, charge deposition.
//! * [`geometry`]: atoms, surfaces and dielectric / ion maps.
//! * [`problem`]: constants and assembly of the sphere and molecular problems.
//! * [`tridiag`]: Thomas solves and the factored per-axis line solvers.
//! * [`schemes`]: LOD, AOS, MAOS, ADI and explicit Euler time integrators.
//! * [`energy`]: fast Poisson, Richardson extrapolation and solvation energies.
//! * [`harness`]: experiment drivers and CSV reports.

pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod problem;
pub mod schemes;
pub mod tridiag;

pub use error::{NpbError, Result};
pub use grid::{make_grid, relative_norms, Axis, Grid3D, NormPair, ScalarField};
pub use problem::NpbProblem;
pub use schemes::{march, MarchConfig, MarchReport, SchemeVariant};
