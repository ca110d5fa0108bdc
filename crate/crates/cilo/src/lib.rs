//! Trajectory and checkpoint files, run directories and the `cilo` command
//! line on top of [`cilo_core`].

pub mod checkpoint;
mod error;
pub mod run;
pub mod traj;

pub use error::{Error, Result};
