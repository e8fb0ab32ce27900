//! In-situ recovery after process failures.
//!
//! *Shrink* continues on the survivors and spreads the lost rows over them;
//! *substitute* puts a warm spare into each failed slot. Both restore every
//! rank to the latest consistent checkpoint tag.

mod block;
mod distribution;
mod plan;
mod shrink;
mod substitute;

use serde::{Deserialize, Serialize};

use crate::simcore::{Phase, World};

pub use block::RowBlock;
pub use distribution::{extra_rows_lower_bound, BlockDistribution};
pub use plan::{plan_shrink_transfers, HostingView, RowSource, Transfer, TransferPlan};
pub use shrink::execute_shrink;
pub use substitute::{execute_substitute, stitch_spare, sync_local_state};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStrategy {
    #[default]
    Shrink,
    Substitute,
}

impl RecoveryStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryStrategy::Shrink => "shrink",
            RecoveryStrategy::Substitute => "substitute",
        }
    }
}

impl std::str::FromStr for RecoveryStrategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "shrink" => Ok(RecoveryStrategy::Shrink),
            "substitute" => Ok(RecoveryStrategy::Substitute),
            other => Err(crate::Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Time and volume of one recovery, split by waste component.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub strategy: RecoveryStrategy,
    pub t_pfd: f64,
    pub t_pfr: f64,
    pub t_pfx: f64,
    pub bytes_moved: u64,
    /// Failed ranks, numbered in the membership before the failure.
    pub failed: Vec<usize>,
}

impl RecoveryReport {
    pub fn zero(strategy: RecoveryStrategy) -> Self {
        Self {
            strategy,
            t_pfd: 0.0,
            t_pfr: 0.0,
            t_pfx: 0.0,
            bytes_moved: 0,
            failed: Vec::new(),
        }
    }
}

/// State of every rank after a recovery, in rank order of the new epoch.
#[derive(Debug, Clone)]
pub struct Restored<S, D> {
    pub statics: Vec<S>,
    pub dynamics: Vec<D>,
    pub report: RecoveryReport,
}

/// Reads per-phase clock deltas over a stretch of operations.
#[derive(Debug, Clone, Copy)]
pub struct PhaseMeter {
    start: [f64; 6],
}

impl PhaseMeter {
    pub fn start(world: &World) -> Self {
        Self {
            start: Phase::ALL.map(|p| world.clock().phase_time(p)),
        }
    }

    pub fn elapsed(&self, world: &World, phase: Phase) -> f64 {
        let i = Phase::ALL.iter().position(|&p| p == phase).unwrap();
        world.clock().phase_time(phase) - self.start[i]
    }

    pub fn report(
        &self,
        world: &World,
        strategy: RecoveryStrategy,
        bytes_moved: u64,
        failed: Vec<usize>,
    ) -> RecoveryReport {
        RecoveryReport {
            strategy,
            t_pfd: self.elapsed(world, Phase::Detection),
            t_pfr: self.elapsed(world, Phase::Reconfiguration),
            t_pfx: self.elapsed(world, Phase::Recovery),
            bytes_moved,
            failed,
        }
    }
}

#[cfg(test)]
mod tests;
