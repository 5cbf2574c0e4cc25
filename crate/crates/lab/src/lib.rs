//! Experiments, file formats and the `wgangp` command line on top of
//! `wgangp-core`.

pub mod cli;
pub mod clock;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod svg;

pub use config::{Command, RunConfig};
pub use error::LabError;
