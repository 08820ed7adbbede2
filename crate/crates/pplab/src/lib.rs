//! Numerical laboratory for the linear pseudoparabolic Cauchy problem
//!
//! ```text
//! u_t - (Δu)_t = Δu + a(x,t) u       on R^n x (0,T),   u(·,0) = u0,
//! ```
//!
//! optionally extended by a convection term `b(x,t)·∇u`. After the gauge
//! change `mu = e^t u` the problem becomes the nonlocal Volterra equation
//! `mu_t = B(V mu)` with `B = (1-Δ)^{-1}` and `V = a + 1`, which this crate
//! solves by the exponential operator series (time-independent potentials)
//! and by Picard iteration (time-dependent potentials and convection).
//!
//! The crate is organised along the machinery that makes those solvers
//! work and checkable:
//!
//! * [`kernel`] — the Bessel potential kernel `B`, its radial derivative,
//!   the modified Bessel functions `K_nu` they are built from, and the
//!   two-sided exponential bounds on `B`.
//! * [`grid`] — truncated cell-centered grids, scalar fields with a
//!   `u`/`mu` gauge flag, weighted `L^1` norms, and the auxiliary
//!   convolution `Phi_rho g = e^{-rho|·|} * g`.
//! * [`operators`] — the operator `B` (spectral and quadrature backends),
//!   the convolution–multiplication operators `BV`, their iterates and
//!   time-integrated versions, the convection operator, and the
//!   epsilon-sequence / envelope machinery that controls the series.
//! * [`evolution`] — the series and Picard solvers plus the mild-equation
//!   residual used to validate every run.
//! * [`analysis`] — classification of problem instances (global existence,
//!   nonexistence, instantaneous blow-up), divergence indicators, asymptotic
//!   lower-bound fits, comparison-principle checks, and grid certificates
//!   for the operator inequalities.
//! * [`verify`] — named check suites shared by the CLI and the test suite.
//! * [`io`] — field and manifest serialization (CSV, compact binary,
//!   deterministic JSON).

#![allow(clippy::excessive_precision)] // frozen reference constants and quadrature tables keep full digits

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod operators;
pub mod verify;

pub use error::{Error, Result};
