//! Experiment harness behind the `sg2d` binary: TOML run configs, one
//! subcommand per experiment, CSV tables and a JSON manifest per run.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{resolve_out_dir, run, RunOutcome, SUBCOMMANDS};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::CliError;
pub use manifest::{config_hash, RunManifest, RunStatus};
