//! Discrete-velocity Boltzmann solver built on the mild (characteristic)
//! formulation: Picard iteration, contraction diagnostics for the
//! perturbation map, and renormalised-equation checks.

pub mod cli;
pub mod collision;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod mild_solver;
mod par;
pub mod profiles;
pub mod renorm;
pub mod transport;
pub mod uniqueness_lab;

pub use error::{Error, Result};
pub use par::is_parallel;
