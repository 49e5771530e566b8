//! Command-line scenario runner for the `opo-core` simulator.
//!
//! The binary is a thin clap front end over [`commands`]; configuration
//! parsing and artifact rendering live in [`config`] and [`output`].

pub mod commands;
pub mod config;
pub mod output;
