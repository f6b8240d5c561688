//! Discrete-velocity simulator for a one-dimensional run-and-tumble
//! chemotaxis model: a kinetic transport equation for the cell density
//! coupled to an internal adaptation state and a reaction-diffusion chemical
//! signal, with turning rates driven by the signal's temporal and spatial
//! gradients.
//!
//! Alongside the coupled solver the crate ships the analysis toolbox the
//! model comes with: runtime monitors for the conserved mass and the decay
//! envelopes of the internal state, a heat-kernel representation of the
//! signal used as an independent oracle, the turning-operator linear algebra
//! (equilibrium distribution, solvability, matrix-exponential relaxation),
//! and a drift-limit convergence sweep.

// validators use `!(x > 0.0)` so NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// stencil and quadrature loops index several arrays in lockstep
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod grid;
pub mod hydro;
pub mod io;
pub mod kinetic;
pub mod linalg;
pub mod monitors;
pub mod prng;
pub mod signal;
pub mod sim;

pub use error::{Result, SimError};
