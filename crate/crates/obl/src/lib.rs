//! File formats, plotting and the command-line front end for `obl-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod svg;

pub use error::CliError;
