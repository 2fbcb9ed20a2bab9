//! Spectrum of the self-similar blowup profile of the radial wave equation
//! `u_tt - u_rr - (2/r) u_r + f(u)/r^2 = 0`, `f(u) = -3u(1 - u^2)`, and the
//! nonlinear evolution that checks how solutions approach it.
//!
//! - [`model`]: the equation, the attractor `U0` and the potential `V`.
//! - [`frobenius`]: series solutions at `rho = 0` and `rho = 1`.
//! - [`contfrac`]: continued-fraction eigenvalue equation and spectrum scan.
//! - [`shooting`]: Wronskian cross-check.
//! - [`modes`]: eigenmode profiles.
//! - [`evolve`]: method-of-lines solver for the full equation.
//! - [`analysis`]: similarity-variable post-processing and mode fits.
//! - [`cli`]: configuration, output files and subcommands.

pub mod analysis;
pub mod cli;
pub mod contfrac;
pub mod error;
pub mod evolve;
pub mod frobenius;
pub mod model;
pub mod modes;
pub mod ode;
pub mod shooting;

pub use error::{Error, Result};
