//! Config-driven experiment runner: every run reads one JSON document and
//! writes CSV/JSON outputs plus a manifest into an output directory.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod trials;

pub use config::{Experiment, ExperimentConfig, Kind};
pub use error::{CliError, Status};
pub use runner::{run, RunOutcome};
