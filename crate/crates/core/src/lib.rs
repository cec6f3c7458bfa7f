//! Steady-state solver for two-dimensional rarefied cavity flows.
//!
//! The velocity space is discretized by a Grad–Hermite expansion of order
//! `M` ([`hermite`]), the collision term is one of the BGK-family relaxation
//! models ([`collision`]), and physical space uses a cell-centered finite
//! volume scheme on a rectangular grid with diffuse walls ([`spatial`]).
//! The steady state is found with forward Euler, the four-direction fast
//! sweeping iteration ([`single_level`]), or the nonlinear FAS multigrid
//! cycle built on top of it ([`multigrid`]). [`scenario`] wires the three
//! cavity benchmarks to configuration files and text output.

pub mod collision;
pub mod error;
pub mod hermite;
pub mod multigrid;
pub mod scenario;
pub mod single_level;
pub mod spatial;

pub use error::{Error, Result};
