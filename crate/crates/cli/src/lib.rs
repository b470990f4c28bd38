//! Batch frontend for the `supix-core` kernels: file formats, run
//! configuration, reports, and the command implementations behind the
//! `supix` binary.

pub mod commands;
pub mod config;
pub mod formats;
pub mod report;
