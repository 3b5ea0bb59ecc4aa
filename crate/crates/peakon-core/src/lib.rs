//! Simulation, classification and verification of dynamical peakons.
//!
//! A peakon is a peaked travelling-wave profile `u(x, t) = A(t) exp(-|x - X(t)|)`.
//! For the family of nonlinear wave equations
//!
//! ```text
//! m_t + f(u, u_x) m + (g(u, u_x) m)_x = 0,      m = u - u_xx,
//! ```
//!
//! a single peakon evolves by a closed two-dimensional system in the amplitude
//! `A` and position `X`, driven by one-dimensional reductions of `f` and `g`.
//! This crate takes `f` and `g` as expressions in a small DSL ([`expr`]),
//! builds the reduced system by adaptive quadrature ([`reduce`]), integrates
//! single- and multi-peakon dynamics ([`peakon`], [`multipeakon`]), classifies
//! the long-time amplitude/position behaviour ([`classify`]), provides a
//! catalog of closed-form solutions for cross-checking ([`catalog`]), and
//! verifies simulation output against the governing equations ([`verify`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm` feature
//! instead of the default `std` feature for embedded use.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("peakon-core requires either the `std` or the `libm` feature");

mod math;

pub mod expr;
pub mod quad;
pub mod ode;
pub mod reduce;
pub mod peakon;
pub mod multipeakon;
pub mod classify;
pub mod catalog;
pub mod verify;

pub use expr::{ExprAst, NonlinearitySpec};
pub use reduce::{ReducedDynamics, ReducedSystem};
pub use peakon::{PeakonState, Trajectory};
pub use multipeakon::NPeakonState;
pub use classify::BehaviorReport;
