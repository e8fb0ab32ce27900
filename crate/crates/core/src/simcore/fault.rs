//! Fault plans: which original rank is killed, and when.
//!
//! A kill fires at an iteration boundary of the solver: outer iteration
//! `outer_iteration` (1-based), after `inner_offset` inner iterations of that
//! outer iteration's inner solve. An offset equal to the inner iteration count
//! (the default) kills the process after the inner solve finished but before
//! the outer update and its checkpoint, which loses the most work.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::ProcId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    /// Original rank (process id) of an initially active process.
    pub rank: usize,
    pub outer_iteration: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_offset: Option<usize>,
}

impl Injection {
    pub fn new(rank: usize, outer_iteration: u64) -> Self {
        Self {
            rank,
            outer_iteration,
            inner_offset: None,
        }
    }

    pub fn at_offset(mut self, offset: usize) -> Self {
        self.inner_offset = Some(offset);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultPlan {
    pub injections: Vec<Injection>,
}

impl FaultPlan {
    pub fn new(injections: Vec<Injection>) -> Self {
        Self { injections }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.injections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.injections.is_empty()
    }

    /// Checks the plan against the world and solver shape.
    ///
    /// `processes` is the number of initially active ranks; spares cannot be
    /// targeted. `max_outer_iterations` bounds the trigger and `inner_iterations`
    /// bounds the offset.
    pub fn validate(&self, processes: usize, max_outer_iterations: u64, inner_iterations: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for inj in &self.injections {
            if inj.rank >= processes {
                return Err(Error::Config(format!(
                    "fault plan targets rank {} but only {} active ranks exist",
                    inj.rank, processes
                )));
            }
            if !seen.insert(inj.rank) {
                return Err(Error::Config(format!(
                    "fault plan targets rank {} more than once",
                    inj.rank
                )));
            }
            if inj.outer_iteration == 0 || inj.outer_iteration > max_outer_iterations {
                return Err(Error::Config(format!(
                    "trigger {} for rank {} is outside outer iterations 1..={}",
                    inj.outer_iteration, inj.rank, max_outer_iterations
                )));
            }
            if let Some(off) = inj.inner_offset {
                if off > inner_iterations {
                    return Err(Error::Config(format!(
                        "inner offset {off} exceeds inner iteration count {inner_iterations}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fills unspecified offsets with `inner_iterations`.
    pub fn resolved(&self, inner_iterations: usize) -> Vec<ResolvedInjection> {
        self.injections
            .iter()
            .map(|inj| ResolvedInjection {
                proc: ProcId(inj.rank),
                outer_iteration: inj.outer_iteration,
                inner_offset: inj.inner_offset.unwrap_or(inner_iterations),
                fired: false,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedInjection {
    pub proc: ProcId,
    pub outer_iteration: u64,
    pub inner_offset: usize,
    pub fired: bool,
}

impl ResolvedInjection {
    /// True once the solver reached or passed the kill point.
    pub fn due(&self, outer_iteration: u64, inner: usize) -> bool {
        !self.fired && self.outer_iteration == outer_iteration && inner >= self.inner_offset
    }
}
