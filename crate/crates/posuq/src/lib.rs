//! IO, file formats and pipeline orchestration around `posuq-core`.

pub mod config;
pub mod dataset;
pub mod models;
pub mod pipeline;
pub mod report;
