//! Proportional-integral boundary stabilization of the nonlinear 1-D
//! Saint-Venant equations with arbitrary friction and slope.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the numerical side of
//! the problem:
//!
//! * [`channel`]: physical channel, slope and fluvial-regime checks,
//! * [`steady`]: backwater profiles for constant inflow and the quasi-static
//!   family for a time-varying inflow,
//! * [`riemann`]: characteristic speeds, source couplings and the
//!   physical/Riemann coordinate change around a base profile,
//! * [`certifier`]: the Lyapunov stability certificate for a pair of PI gains,
//! * [`pde`]: a method-of-lines closed-loop simulator,
//! * [`analysis`]: norms, Lyapunov evaluation along trajectories, decay fits
//!   and input-to-state checks.
//!
//! File formats, configuration parsing and the command-line driver live in
//! the companion `stvenant-lab` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod certifier;
pub mod channel;
mod error;
mod math;
pub mod numerics;
pub mod pde;
pub mod riemann;
pub mod steady;

pub use error::{Error, Result};
