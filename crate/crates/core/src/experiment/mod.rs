//! Experiment machinery: configuration, sweep runner, replicate
//! aggregation, the ε-diagnostic and plot-data emission.

pub mod aggregate;
pub mod config;
pub mod epsilon;
pub mod plotdata;
pub mod sweep;
