//! Numerical laboratory for heat flow of time-dependent Witten Laplacians
//! `L = Δ_{g(t)} − ∇φ(t)·∇` on model manifolds (circle, flat torus, truncated
//! line, polar sphere band), together with the machinery needed to check
//! differential Harnack inequalities under super Perelman Ricci flow
//! conditions `½∂ₜg + Ric(L) ≥ κ·g`:
//!
//! * [`geometry`] — metric/potential families, curvature oracle, geodesic
//!   distances and their time derivatives, certified C² cutoffs;
//! * [`flowcheck`] — grid certificates for the curvature conditions and the
//!   derived constants (A², B, K₁, K₂, D, E);
//! * [`heat`] — positivity-preserving solvers for `∂ₜu = Lu` and derived
//!   log-gradient fields;
//! * [`harnack`] — margin evaluation for the gradient, integrated and
//!   Li–Yau-type bounds plus finite-difference residuals of the supporting
//!   identities;
//! * [`diffusion`] — Euler–Maruyama sampling of the associated diffusion with
//!   Feynman–Kac and supermartingale cross-checks;
//! * [`scenario`] / [`runner`] — declarative scenario configs and the check
//!   pipeline behind the command line front end.

#![forbid(unsafe_code)]

pub mod diffusion;
pub mod error;
pub mod flowcheck;
pub mod geometry;
pub mod harnack;
pub mod heat;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::CoreError;

pub type Result<T> = std::result::Result<T, CoreError>;
