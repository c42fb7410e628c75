//! Experiment harness behind the `kdopt` binary: run configuration,
//! seeded repeats over a worker pool, CSV artifacts, bootstrap summaries
//! and SVG trace plots.

pub mod bootstrap;
pub mod config;
pub mod csvio;
pub mod experiments;
pub mod svgplot;

pub use config::RunConfig;
pub use experiments::run_experiment;
