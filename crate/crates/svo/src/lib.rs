//! File formats, synthetic sequences, evaluation reports and the command
//! line on top of [`svo_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod method;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
