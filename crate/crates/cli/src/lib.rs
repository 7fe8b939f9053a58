//! Batch driver for `partloop-core`: run configuration, snapshot files,
//! simulation and analysis commands, and the backend benchmark.

pub mod bench;
pub mod commands;
pub mod config;
pub mod snapshot;

pub use config::{ConfigError, Format, KernelChoice, Mode, RunConfig};
pub use snapshot::Snapshot;
