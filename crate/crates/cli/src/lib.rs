//! Configuration, experiment runners and output formatting behind the
//! `exciton` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod format;

pub use config::{Experiment, ExperimentConfig};
pub use error::RunError;
pub use experiments::{run, RunSummary};
