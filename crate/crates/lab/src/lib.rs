//! Experiment runner around `recscale-core`: configuration files, the run
//! store, sweeps, reports and dataset export.

pub mod config;
pub mod error;
pub mod export;
pub mod report;
pub mod store;
pub mod sweep;
