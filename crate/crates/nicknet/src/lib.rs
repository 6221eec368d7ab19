//! Files, datasets, configuration and the `nicknet` command line around
//! [`nicknet_core`].

pub mod config;
pub mod dataset;
mod error;
pub mod expr;
pub mod idx;
pub mod netfile;
pub mod report;
pub mod trace;

pub use error::{Error, Result};
