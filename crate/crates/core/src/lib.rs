//! In-situ recovery from process failures in a simulated SPMD world.
//!
//! The crate simulates a message-passing application (a distributed
//! inner/outer flexible GMRES solver) on virtual processes, kills processes
//! according to a fault plan, and recovers either by shrinking onto the
//! survivors or by substituting warm spares, restoring state from buddy
//! in-memory checkpoints. Every second of simulated time is attributed to
//! useful work or to one of the overhead components.

pub mod checkpoint;
mod error;
pub mod harness;
pub mod recovery;
pub mod simcore;
pub mod solver;

pub use error::{Error, Result};
