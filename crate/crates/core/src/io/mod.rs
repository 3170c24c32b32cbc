//! Run configuration and sensor file I/O.

pub mod config;
pub mod sensors;
pub mod subsample;

pub use config::{LoadedConfig, RunConfig};
