//! Command-line driver and annotation review service for uwqa.

pub mod cli;
pub mod commands;
pub mod config;
pub mod layout;
pub mod service;
pub mod verdict;

pub use cli::{run, Cli};
