//! Command implementations behind the `sinco` binary.

pub mod args;
mod commands;
pub mod error;
mod manifest;
pub mod pipeline;

pub use args::{Cli, Command};
pub use commands::*;
pub use error::{exit, CliError, Result};
pub use manifest::RunManifest;
