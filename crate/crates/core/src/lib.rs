//! Numerical core for postselected weak-measurement protocols.
//!
//! Everything here is pure computation over owned, immutable values and
//! builds without `std` (an allocator is required). The companion `weakval`
//! crate adds scenario files, CSV reports, the command line and a parallel
//! Monte Carlo driver on top of this crate.
//!
//! Module map:
//!
//! - [`qlin`]: dense complex linear algebra (states, operators, tensor
//!   products, partial traces, Hermitian eigensystems, trace distance).
//! - [`states`]: projectors, resolutions of the identity, Born probabilities
//!   and projective measurements.
//! - [`protocols`]: finite-dimensional meter protocols, conditional meter
//!   expectations, closed-form weak-value limits and the strong conditional
//!   expectation they disagree with.
//! - [`meter_grid`]: a grid-sampled `L²(ℝ)` meter with closed-form meter
//!   functions, translation-based coupling and grid weak values.
//! - [`weakness`]: the binned position operator and the disturbance of the
//!   system state after a meter readout.
//! - [`montecarlo`]: single-trial simulation from the exact joint outcome
//!   distribution, with counter-based random streams.
//! - [`convergence`]: log-log slope fits and Richardson extrapolation.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod convergence;
mod error;
pub(crate) mod math;
pub mod meter_grid;
pub mod montecarlo;
pub mod protocols;
pub mod qlin;
pub mod states;
pub mod weakness;

pub use error::{Error, ErrorKind, Result};
pub use qlin::{DensityMatrix, Operator, StateVector, Tags, TensorLayout, C64};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
