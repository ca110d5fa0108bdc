//! Continuous imitation learning from observation.
//!
//! An inverse dynamics model labels expert observations, a policy clones
//! those labels under error-scaled Gaussian exploration, and a discriminator
//! over path signatures decides which of the policy's own rollouts are close
//! enough to the expert to be fed back to the inverse dynamics model.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line front end live in the `cilo` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod env;
mod error;
pub mod exploration;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod signature;

pub use error::{Error, Result};
