//! Deterministic simulated message-passing world.
//!
//! Virtual processes live on nodes of a fixed [`NodeMap`]; traffic is costed
//! by a [`LatencyModel`]. Failures are injected from a [`FaultPlan`], surface
//! as [`Error::ProcFailed`](crate::Error::ProcFailed) from the next operation
//! that touches the dead process, and are repaired by advancing the
//! communicator [`CommEpoch`].

mod fault;
mod types;
mod world;

pub use fault::{FaultPlan, Injection, ResolvedInjection};
pub use types::{log2_ceil, LatencyModel, NodeMap, ProcId, ProcessStatus, RankId, SparePlacement};
pub use world::{
    consensus_round, Agreement, CollectiveKind, CommEpoch, Message, Phase, SimClock, TraceEvent, TraceKind, World,
    WorldConfig,
};
