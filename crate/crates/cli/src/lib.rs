//! Experiment runner for `structnet`: `key=value` run configurations,
//! reproducible CSV artifacts, and the invariant verification suites.

pub mod config;
pub mod csv;
mod error;
pub mod run;
pub mod verify;

pub use config::{ConfigError, ConfigErrors, Experiment, RunConfig};
pub use error::{CliError, Result};
pub use run::run;
pub use verify::{report, verify, Check};
