//! Simulation and verification toolkit for feedback-controlled, Galerkin-truncated
//! 2D stochastic Navier–Stokes dynamics on the periodic torus.

pub mod control;
pub mod cost;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod noise;
pub mod optimizer;
pub mod rng;
pub mod spectral;
pub mod table;

pub use error::{Error, Result};
pub use spectral::{Mode, Norms, SpectralField};
