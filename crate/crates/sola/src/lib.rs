//! Solver and estimate-verification harness for nonlinear parabolic problems
//! of the form `u_t - div a(x,t,grad u) = h(u) f + mu` with nonnegative
//! integrable data, a zero-order factor `h` that may blow up at the origin,
//! and a nonnegative bounded Radon measure `mu` on the space-time cylinder.
//!
//! The solver builds the classical approximation ladder (truncate `h`, `f`
//! and the initial datum at level `n`, mollify the measure) and marches each
//! rung with implicit Euler; every a priori estimate the ladder is known to
//! satisfy is re-computed on the discrete solution as a pass/fail monitor.

pub mod config;
pub mod error;
pub mod estimates;
pub mod experiments;
pub mod fields;
pub mod grid;
pub mod measures;
pub mod problem;
pub mod report;
pub mod stepper;
pub mod truncations;

pub use error::{Error, Result};
