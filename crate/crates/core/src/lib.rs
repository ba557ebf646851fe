//! Exciton transfer along a vibrating molecular chain: Lindblad dynamics,
//! closed-form dimer results, a classical hopping baseline and the parameter
//! scans built on top of them.

pub mod classical;
pub mod dimer;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod model;
pub mod numerics;
pub mod pool;
pub mod sweeps;

pub use error::{Error, Result};
