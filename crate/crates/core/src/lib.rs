//! Characteristics, exact Riemann solutions, finite-volume reference runs, entropy checks and
//! inverse design for the balance law `u_t + (u²/2 + g(x))_x = 0` with a compactly supported
//! bump potential `g`.
//!
//! The numerical core is generic over the float type; the aliases below fix it to `f64`.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charsol;
pub mod design;
pub mod entropy;
pub mod error;
pub mod flow;
pub mod fvm;
pub mod model;
pub mod period;
pub mod quadrature;
pub mod scalar;
pub mod shooting;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Right state of the Riemann datum `u₀ = -2` on `x < 0`, `2` on `x > 0`.
pub const RIEMANN_STATE: f64 = 2.0;

pub type Bump = model::BumpPotential<f64>;
pub type State = flow::PhaseState<f64>;
pub type Orbit = flow::Trajectory<f64>;
pub type FlowOpts = flow::FlowOptions<f64>;
pub type ShootOpts = shooting::ShootOptions<f64>;
pub type Sample = charsol::SolutionSample<f64>;
pub type Grid = fvm::Grid1D<f64>;
pub type Field = fvm::CellField<f64>;
