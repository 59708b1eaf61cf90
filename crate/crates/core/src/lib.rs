//! Trace-driven memory traffic simulation for RNN inference schedules.

pub mod cachesim;
pub mod catalog;
pub mod error;
pub mod executor;
pub mod metrics;
pub mod model;
pub mod report;
pub mod tracegen;
pub mod verify;

pub use error::{Error, Result};
