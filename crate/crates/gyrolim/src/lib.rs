//! Trajectory runs, table sweeps, file formats and the `gyrolim` command line.

pub mod commands;
pub mod config;
pub mod harness;
pub mod output;
pub mod selftest;
