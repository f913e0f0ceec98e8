//! Command-line orchestration of the reduction and reconstruction pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod sweep;

pub use commands::{run, Cli, Command};
pub use config::Config;
pub use error::{CliError, CliResult};
pub use sweep::{SweepReport, SweepRow};
