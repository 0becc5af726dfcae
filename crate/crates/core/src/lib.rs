//! Spectral Green-function solver for the damped wave equation with a
//! third-order dissipative term,
//!
//! ```text
//! u_tt + a u_t − c² ∂x²(ε u_t + u) = f(x, t, u, u_x, u_t)
//! ```
//!
//! on `[0, π]` with Dirichlet or Neumann data, or on a ring with a winding number.
//! Nonlinear problems are solved by a Picard iteration over a Duhamel integral
//! whose contraction is certified a priori.

pub mod error;
pub mod mode_kernel;
pub mod reduction;
pub mod physics;
pub mod picard;
pub mod spectral;
pub mod verification;

pub use error::{Error, MatchingFailure, Result};
