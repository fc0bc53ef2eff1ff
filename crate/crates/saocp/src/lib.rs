//! Streams, configuration, reports and verification suites around
//! [`saocp_core`], plus the `saocp` command-line front end.

pub mod config;
mod error;
pub mod report;
pub mod rng;
pub mod runner;
pub mod streams;
pub mod verify;

pub use error::{Error, Result};
