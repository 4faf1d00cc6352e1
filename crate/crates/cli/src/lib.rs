//! Command-line plumbing around `sgda-core`: configuration loading, the six
//! verbs, and atomic artifact output.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
