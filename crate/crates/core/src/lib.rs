//! Cahn–Hilliard equation with dynamic boundary conditions and possibly
//! singular potentials on a periodic strip.
//!
//! - [`potential`]: maximal monotone graphs, Yosida regularization, potential
//!   pairs and their compatibility and coercivity checks.
//! - [`grid`]: the strip grid, lumped operators, norms and the inverse
//!   Neumann Laplacian.
//! - [`solver`]: the mass-conserving implicit scheme and ε-continuation.
//! - [`diagnostics`]: per-step monitors, continuous dependence, separation.
//! - [`cli`]: config parsing and experiment orchestration.

pub mod cli;
pub mod diagnostics;
pub mod grid;
pub mod potential;
pub mod solver;
