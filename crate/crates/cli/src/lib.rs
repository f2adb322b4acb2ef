//! Scenario-driven experiment runner for `ris_harq`.
//!
//! Scenarios are TOML (or JSON) files describing a network, the HARQ setup,
//! an SNR grid in dB and a phase-shift strategy. Each subcommand writes one CSV
//! and one JSON manifest that is enough to repeat the run.

pub mod error;
pub mod run;
pub mod scenario;
pub mod table;

pub use error::{CliError, CliResult};
pub use run::{compute, rerun, run, Command, Report, RunManifest, RunOutcome};
pub use scenario::{load_scenario, read_raw, resolve, Overrides, RawScenario, Scenario};
