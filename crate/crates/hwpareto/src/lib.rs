//! File formats, configuration, manifests and the command-line front end for
//! [`hwpareto_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;

pub use error::{exit, CliError, CliResult};
