//! Std companion to `qetlab-core`: configuration, deterministic JSON/CSV
//! output, state serialization, the acceptance suite and the CLI.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod state_io;
pub mod validation;

pub use error::{LabError, LabResult};
