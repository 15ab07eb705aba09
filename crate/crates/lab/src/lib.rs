//! Scenario files, the run pipeline and its CSV/JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod export;
pub mod runner;
pub mod scenarios;

pub use config::ScenarioSpec;
pub use error::LabError;
pub use runner::{run_scenario, Outcome};
