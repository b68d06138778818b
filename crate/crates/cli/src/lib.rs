//! Library half of the `xdc` command-line tool.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod mosaic;
pub mod pipeline;
pub mod sweep;
pub mod toy;

pub use config::{BackendKind, RunArgs, RunConfig};
pub use error::{exit, CliError};
