//! File formats, experiment configuration, fixtures and the suite runner
//! behind the `monge` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
mod error;
pub mod fixtures;
pub mod formats;
pub mod runner;

pub use config::{parse_epsilons, ExperimentConfig, Overrides, Suite};
pub use error::{Error, Result};
pub use runner::{run, RunSummary};
