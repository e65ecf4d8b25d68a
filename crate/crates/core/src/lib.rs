//! Packetized energy management of a water-heater fleet with a model
//! predictive precompensator.
//!
//! The crate is `no_std` (with `alloc`) and deterministic: every random draw
//! comes from a seeded ChaCha stream.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coordinator;
pub mod fleet;
pub mod linalg;
pub mod mpc;
pub mod scoring;
pub mod signals;
pub mod vbmodel;
