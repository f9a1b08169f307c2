//! Std companion to `irsopt-core`: TOML configs with dotted overrides, beam
//! and channel file formats, result writers, a Rayon executor and the
//! `irsopt` command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod output;
pub mod parallel;

pub use error::{CliError, Result};
