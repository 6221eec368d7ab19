//! Simulation core for a nicked-DNA neural engine.
//!
//! Values in `[0, 1]` are stored as the relative concentration of DNA
//! molecules nicked at a site. Multiplication is a second, independent nick;
//! dot products come from merging droplets; a seesaw gate cascade applies a
//! step activation. Around that chemistry sit a discrete-event model of the
//! microfluidic array that executes it, closed-form latency and area models,
//! and a small feedforward network runtime.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, datasets and
//! the command line live in the `nicknet` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ann;
pub mod chem;
pub mod device;
mod error;
pub mod fluidics;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
pub use stochastic::FractionalValue;
