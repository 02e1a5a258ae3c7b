//! Command-line and HTTP fronts for the greenval engine.

pub mod cli;
pub mod engine;
pub mod server;
