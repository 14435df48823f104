//! Dataset bundles, CSV import, run configuration, wall-clock experiment
//! harness and the `scalegnn` command line, on top of `scalegnn-core`.

pub mod binfmt;
pub mod bundle;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod import;
pub mod methods;
pub mod output;

pub use error::{Error, Result};
pub use scalegnn_core as core;
