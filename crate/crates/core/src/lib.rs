//! Numerical laboratory for the open-boundary KPZ equation, studied through its
//! Hopf-Cole transform: the multiplicative stochastic heat equation on [0,1]
//! with Robin boundary conditions
//!
//! ```text
//!   dz = z_xx dt + z dW,    z_x(t,0) = A z(t,0),    z_x(t,1) = B z(t,1).
//! ```
//!
//! The crate provides
//!
//! * the Robin heat kernel two independent ways (Sturm-Liouville eigen-expansion
//!   and Feynman-Kac Monte Carlo over reflected Brownian bridges with boundary
//!   local times),
//! * a positivity-preserving solver whose discrete propagators satisfy the
//!   convolution property exactly,
//! * the quotient-space distances used to compare solutions modulo scaling,
//! * continuous-probability-kernel algebra, Doeblin coupled chains and the
//!   propagator-derived kernels behind the one-force-one-solution argument,
//! * polymer path sampling and exponential tilt functionals,
//! * batch experiments: synchronization, ergodic averages, growth rates and the
//!   tilted-noise support probe,
//!
//! all wired to a `okpz` CLI with reproducible manifests.

pub mod coupling;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod metrics;
pub mod polymer;
pub mod solver;

pub mod cli;

pub use error::{Error, Result};
