//! Simulation and Bayesian estimation core for sensing a local field on one
//! end of a Heisenberg spin chain through sequential projective measurements
//! on the other end.
//!
//! The crate is `no_std` with `alloc`; IO, configuration and parallel sweeps
//! live in the `chainsense` companion crate.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod inference;
pub mod protocol;
pub mod rng;
pub mod scaling;
pub mod spin;

pub use error::{Error, Result};
