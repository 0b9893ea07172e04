//! Command-line plumbing for tipping-point analyses: dataset files, JSON run
//! configs, the method planner and CSV/SVG artifacts.

pub mod commands;
pub mod config;
pub mod io;
pub mod plan;
pub mod report;
