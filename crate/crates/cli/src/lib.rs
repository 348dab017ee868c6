//! Configuration, file formats and subcommands of the `emv` driver.

pub mod commands;
pub mod config;
pub mod io;
