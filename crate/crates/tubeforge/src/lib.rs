//! Action-tube extraction toolkit: reads footage, person detections and
//! temporal labels, and writes fixed-shape labeled tubes plus a manifest.
//!
//! The algorithms live in [`tubeforge_core`]; this crate adds file formats,
//! the extraction pipeline, benchmarking and the `tubeforge` CLI.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod netpbm;
pub mod pipeline;
pub mod reports;
pub mod tensor_io;

pub use error::{Error, Result};
pub use tubeforge_core as core;
