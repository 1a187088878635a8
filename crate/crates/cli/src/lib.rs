//! Command-line harness around `conformal-core`: CSV/JSON file plumbing,
//! calibrate/predict/eval commands, and reproducible benchmark sweeps.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
