//! Simulation of a jointless track circuit occupied by a multi-wheel-set
//! train, modeled as a cascade of equivalent six-terminal networks over the
//! two-rail-plus-ground transmission line.
//!
//! The crate computes the complex train shunting impedance at any head
//! position, verifies the cascade against an independent lumped nodal
//! oracle, and carries the influence analyses (wheel resistance,
//! compensation-capacitor faults, ballast resistance, rail impedance) and
//! the wheel-set structural-importance ranking on top of it.

pub mod analysis;
pub mod elements;
pub mod error;
pub mod estn;
pub mod fit;
pub mod jtc;
pub mod mat;
pub mod nodal;
pub mod railline;
pub mod scenario;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64;
