//! Command-line front end and live stream server for the short-service engine.

pub mod cli;
pub mod commands;
pub mod stream;
