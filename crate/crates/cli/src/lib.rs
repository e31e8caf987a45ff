//! Scenario-driven runner for the smoothing pipelines.

pub mod artifacts;
pub mod catalog;
pub mod error;
pub mod run;
pub mod scenario;

pub use artifacts::{scenario_hash, write_artifacts};
pub use catalog::list_catalog;
pub use error::CliError;
pub use run::{execute, Report, RunOutput, Status};
pub use scenario::{load, Built, Overrides, Scenario};
