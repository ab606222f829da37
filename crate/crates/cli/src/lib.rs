//! Command-line and HTTP front end for the `winprob` engine.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod server;
