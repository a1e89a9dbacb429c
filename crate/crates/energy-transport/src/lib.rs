//! 1-D simulator and analysis toolkit for a degenerate energy-transport
//! system: coupled parabolic equations for a particle density n and energy
//! density w = nθ with temperature-dependent fluxes nθ^(1/2−β), nθ^(3/2−β)
//! and a relaxation source n(1−θ)/τ.
//!
//! The crate integrates the system with an implicit Euler / Newton scheme on
//! a uniform grid, adapts the time step, and turns the model's entropy
//! machinery (admissible exponent sets, entropy functionals, dissipation
//! integrals, decay bounds) into executable diagnostics.

// `!(v > 0.0)` is the NaN-rejecting positivity test used throughout, and
// indexed loops are the house style for stencil code
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod admissible;
pub mod cli;
pub mod diagnostics;
pub mod discretization;
pub mod model;
pub mod solver;

pub use discretization::{BoundaryKind, Grid1D, State};
pub use model::{EntropyPair, ModelParams, Relaxation};
pub use solver::{SolverConfig, Trajectory};
