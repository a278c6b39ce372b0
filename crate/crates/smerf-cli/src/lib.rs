//! Library half of the `smerf` binary: CSV ingestion, the experiment
//! pipelines, and error-to-exit-code mapping. Kept as a lib so the
//! integration suite can drive the same code paths in-process.

pub mod error;
pub mod io;
pub mod pipelines;

pub use error::{CliError, Result};
