//! Command-line harness for the hytm-core simulator: run configs, the
//! history/schedule/metrics file formats and the `run`, `scenario` and
//! `report` verbs.
//!
//! Exit codes: 0 when every requested check passes, 1 when one fails, 2 on
//! configuration or input errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{cmd_report, cmd_run, cmd_scenario, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
pub use config::{CheckKind, ConfigFile, Overrides, RunConfig};
pub use error::CliError;
