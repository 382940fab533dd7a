//! Std companion of `skewfsv-core`: returns ingestion, configuration files,
//! provenance-stamped outputs, markdown reports and a rayon executor.

pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod provenance;
pub mod report;

pub use error::{IoError, Result};
pub use exec::Parallel;
pub use provenance::Provenance;
pub use skewfsv_core as core;
