//! Configuration-driven batch runner for the stoplab verification suites.
//!
//! A run reads one TOML experiment file, executes the enabled checks as
//! tasks that exchange data through files in the output directory, and
//! writes a manifest with the SHA-256 digest of every artifact.

pub mod checks;
pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use run::{run_experiment, CheckOutcome, RunManifest, Status};
