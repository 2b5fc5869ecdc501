//! Library surface of the pipeline binary: configuration, manifest, stage
//! implementations, output writers.

pub mod config;
pub mod manifest;
pub mod outputs;
pub mod stages;
