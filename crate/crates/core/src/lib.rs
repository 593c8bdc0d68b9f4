//! Simulation laboratory for anomalous diffusion of a test particle coupled to
//! a bath of heterogeneous Brownian surround particles.
//!
//! The crate simulates the finite-N Langevin system, samples its Gaussian and
//! superstatistical limits exactly, evolves densities under the associated
//! pseudo-differential equation, and provides the estimators used to compare
//! them.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod io;
pub mod kfp;
pub mod limit_gauss;
pub mod manifest;
pub mod mass_laws;
pub mod params;
pub mod particle_sim;
pub mod quad;
pub mod rng;
pub mod selftest;
pub mod stats;
pub mod superstat;

pub use ensemble::{PathMatrix, TrajectoryEnsemble};
pub use error::{Error, Result};
pub use exec::Exec;
pub use mass_laws::{LevyCouple, MassFamily, MassLaw, VarianceFn};
pub use params::{DerivedConstants, MassLawMeta, SystemConfig, ValidationReport};
