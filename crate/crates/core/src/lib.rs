//! Quantum thermodynamics of the boundary time-crystal.
//!
//! The crate covers a collective spin ensemble under a transverse field
//! `H = (Ω/√2) V_x`, coupled to a thermal bosonic environment through the
//! collective ladder operators `V_±`:
//!
//! - [`dicke`]: collective operators and states in the maximal-spin sector.
//! - [`liouville`]: the finite-N Lindblad generator, RK4 propagation and the
//!   steady state.
//! - [`meanfield`]: thermodynamic-limit magnetisation dynamics and its two
//!   conserved quantities.
//! - [`fluctuations`]: Gaussian covariance dynamics of the quantum
//!   fluctuation operators and their von Neumann entropy.
//! - [`thermo`]: heat current, work power, entropy flux, entropy production
//!   and the Spohn bound.
//! - [`collision`]: the repeated-interaction model with oscillator ancillas
//!   whose continuous limit reproduces the Lindblad generator.
//! - [`stochastic`]: Kraus channels, the Crooks reversal map and the
//!   quasi-probability distribution of stochastic entropy production.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tests spell out decimal oracle values such as 0.70710678.
#![cfg_attr(test, allow(clippy::approx_constant))]

pub mod collision;
pub mod dicke;
pub mod error;
pub mod fit;
pub mod fluctuations;
pub mod linalg;
pub mod liouville;
pub mod meanfield;
pub mod ode;
pub mod operator;
pub mod stochastic;
pub mod thermo;

pub use dicke::{Axis, DenseOperator, DensityMatrix, SystemParams};
pub use error::{Error, Result};
pub use liouville::{LindbladGenerator, Trajectory};
pub use meanfield::{MeanFieldState, MeanFieldTrajectory};
