//! Batch front-end for the `mbl-core` laboratory.
//!
//! [`config`] resolves a [`RunConfig`] from a JSON file, flags and `MBL_TOL`;
//! [`run::run`] executes one command and writes its reports through [`report`].

pub mod config;
pub mod report;
pub mod run;

pub use config::{CliError, Command, Format, PartialConfig, RunConfig};
pub use run::{run, Outcome};
