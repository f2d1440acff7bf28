//! Experiment runner, verification driver and file formats around
//! `rtrl-core`.

pub mod config;
pub mod format;
pub mod log;
pub mod runner;
pub mod summarize;
pub mod verify;
