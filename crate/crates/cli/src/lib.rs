//! File formats, configuration, and pipeline orchestration around
//! `centerdepth-core`: dataset emission/loading with checksums, depth-pair
//! and report serialization, plot exports, and the subcommand runners
//! behind the `centerdepth` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod raster_io;
pub mod report;
