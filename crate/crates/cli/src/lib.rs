//! Library side of the `averify` command-line tool: configuration files,
//! run archives, SVG plots and the subcommand drivers.

pub mod archive;
pub mod commands;
pub mod config;
pub mod plot;
