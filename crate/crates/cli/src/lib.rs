//! Library side of the `viab` command: configuration, subcommands and plot
//! output.

pub mod commands;
pub mod config;
pub mod format;
pub mod svg;

pub use commands::{cmd_check, cmd_fit, cmd_kernel, cmd_simulate, OutputOptions, RunReport};
pub use config::{ConfigError, RunConfig};
