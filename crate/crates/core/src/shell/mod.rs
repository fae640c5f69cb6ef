//! Command-line front end: configuration documents, result documents and
//! the subcommands.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{
    cmd_compare_frames, cmd_run, cmd_signalling_test, cmd_sweep, cmd_validate_geometry, load_config, render,
    write_output, CliError, Format, RunOptions, SweepOptions,
};
pub use config::{parse_config, print_config, ConfigError, ConfigErrorKind, Location};
pub use report::{ResultDocument, SCHEMA};
