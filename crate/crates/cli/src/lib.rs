//! Configuration, serialization and mode dispatch for the `ptsoliton` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, Mode, RawConfig, RunConfig};
pub use run::{run, RunError, RunOutcome, RunStatus};
