//! Leak detection for natural gas pipelines using regression models as flow
//! observers.
//!
//! The crate is organised bottom-up:
//!
//! - [`gasprops`]: compressibility and viscosity correlations.
//! - [`dataio`]: telemetry ingestion, cleaning, splitting and feature preprocessing.
//! - [`models`]: the five regression families, metrics and grid search.
//! - [`simulate`]: synthetic telemetry and leak injection.
//! - [`detect`]: residual-driven leak index, persistence alarms, sizing and localization.
//! - [`bench`]: sweep harness and SARR ranking.
//! - [`cli`]: the `pipeleak` command-line front end.

pub mod bench;
pub mod cli;
pub mod dataio;
pub mod detect;
pub mod error;
pub mod gasprops;
pub mod models;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
