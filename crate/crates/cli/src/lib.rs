//! Command-line front end for `sabap`: TOML run configs, trace files and the
//! `run`, `check`, `oracle` and `compare` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod trace;

pub use commands::{cmd_check, cmd_compare, cmd_oracle, cmd_run, CheckArgs, OracleArg, RunArgs};
pub use config::RunConfig;
pub use error::{exit, CliError};
pub use trace::Trace;
