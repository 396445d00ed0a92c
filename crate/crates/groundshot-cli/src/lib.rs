//! Command-line front end for the shooting laboratory: configuration
//! parsing and resolution, the command implementations, and the CSV, JSON,
//! and SVG writers. Everything the binary does lives here as plain
//! functions so integration tests can call commands directly.

pub mod commands;
pub mod config;
pub mod csvout;
pub mod report;
pub mod svg;
