//! Spectral Galerkin simulation of locally monotone SPDEs with degenerate additive
//! noise, together with closed-form ergodicity/mixing checks and Monte Carlo
//! certificates that confront those bounds with simulation.

pub mod checker;
pub mod cli;
pub mod drift;
pub mod error;
pub mod integrator;
pub mod lab;
pub mod noise;
pub mod spectral;

pub use error::{Error, Result};
