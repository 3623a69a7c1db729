//! Numerical core for strongly competing two-component Gross–Pitaevskii
//! systems: grid fields and quadrature, a mass-constrained gradient-flow
//! solver, monotonicity-formula diagnostics, and Hölder seminorm / blow-up
//! analysis.

pub mod error;
pub mod grid;
pub mod interp;
pub mod monotonicity;
pub mod quadrature;
pub mod regularity;
pub mod solver;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Point};
pub use interp::{interpolate, interpolate_gradient};
pub use quadrature::{ball_integral, sphere_integral, BallQuadrature, Kernel};
pub use stencil::{gradient_sq, laplacian};
