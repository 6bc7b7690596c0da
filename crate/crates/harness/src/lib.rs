//! Experiment orchestration for the spindyn backends: declarative run
//! configs, backend comparison, disorder ensembles, SPF convergence scans
//! and figure presets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backends;
pub mod config;
pub mod error;
pub mod presets;
pub mod run;

pub use config::RunConfig;
pub use error::HarnessError;
