//! Spectral analysis of the linear four-zone True Moving Bed (TMB) model.
//!
//! The loop `[-2, 2]` is split into four unit zones with liquid velocities
//! `v1..v4`; the solid phase moves at unit speed in the opposite direction
//! and exchanges solute with the liquid at rate `R`. Modules:
//!
//! - [`params`]: parameter validation and physical-to-dimensionless conversion
//! - [`charfun`]: zone exponentials, the return map `C(λ)` and `Δ(λ)`
//! - [`spectrum`]: real roots of `Δ`, the equal-velocity closed form, collocation
//! - [`eigfun`]: direct/adjoint eigenfunctions and the steady state
//! - [`sensitivity`]: adjoint derivatives of an eigenvalue
//! - [`sim`]: upwind/splitting time integration and diagnostics

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charfun;
pub mod eigfun;
mod error;
pub mod params;
pub mod sensitivity;
pub mod sim;
pub mod spectrum;

pub use error::{Error, ErrorClass};
pub use num_complex::Complex64 as C64;
pub use params::{ModelParams, PhysicalParams, Regime, ValidatedParams};

pub type Result<T> = std::result::Result<T, Error>;

/// Zone boundaries `x_1..x_5`; zone `i` (1-based) is `[PORTS[i-1], PORTS[i]]`.
pub const PORTS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
