//! Command-line front end: problem files, subcommands and output formats.

pub mod app;
pub mod spec;

pub use app::{execute, Cli, Failure, Outcome};
