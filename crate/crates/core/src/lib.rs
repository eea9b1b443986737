//! Numerical laboratory for transport-limited erosion.
//!
//! The surface `H` evolves by the weighted 4-Laplace flow
//! `dH/dt = div(h^{10/3} |grad H|^2 grad H)` on a cylinder that is periodic in
//! `y`, with `H = 0` on the outlet edge `x = W` and no flux through `x = 0`.
//! The crate provides the discretization ([`grid`]), closed-form separable
//! solutions ([`analytic`]), time integration with dissipation monitors
//! ([`evolve`]), checks of the weak and entropy formulations ([`analysis`]),
//! and the instantaneous L1 optimal-transport problem ([`transport`]).

// negated comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod cli;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod numeric;
pub mod transport;

pub use error::{LabError, Result};
pub use grid::{make_grid, FieldRole, GridSpec, Placement, ScalarField, VectorField};
