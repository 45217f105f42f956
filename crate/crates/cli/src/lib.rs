//! Command-line and HTTP front end for the trace analysis engine.

pub mod commands;
pub mod config;
pub mod error;
pub mod server;
