use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a process inside the membership of one communicator epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RankId(pub usize);

/// Physical process identity, fixed for the whole run. Active processes of
/// the initial world carry ids `0..P` (their original rank), spares `P..P+S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcId(pub usize);

impl fmt::Display for RankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rank {}", self.0)
    }
}

impl fmt::Display for ProcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "proc {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessStatus {
    Active,
    Spare,
    Failed,
}

impl ProcessStatus {
    /// Allowed transitions: Active→Failed, Spare→Active, Spare→Failed.
    pub fn can_become(self, next: ProcessStatus) -> bool {
        use ProcessStatus::*;
        matches!((self, next), (Active, Failed) | (Spare, Active) | (Spare, Failed))
    }
}

/// Where spares are placed relative to the active processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparePlacement {
    /// Spares start on the first node after the last node holding an active rank.
    #[default]
    Dedicated,
    /// Spares continue filling nodes in order right after the active ranks.
    Packed,
}

/// Fixed process-to-node placement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMap {
    cores_per_node: usize,
    placement: Vec<usize>,
}

impl NodeMap {
    pub fn new(
        processes: usize,
        spares: usize,
        cores_per_node: usize,
        spare_placement: SparePlacement,
    ) -> Result<Self> {
        if processes == 0 {
            return Err(Error::Config("world needs at least one active process".into()));
        }
        if cores_per_node == 0 {
            return Err(Error::Config("cores_per_node must be positive".into()));
        }
        let mut placement: Vec<usize> = (0..processes).map(|p| p / cores_per_node).collect();
        let first_spare_slot = match spare_placement {
            SparePlacement::Dedicated => processes.div_ceil(cores_per_node) * cores_per_node,
            SparePlacement::Packed => processes,
        };
        placement.extend((0..spares).map(|s| (first_spare_slot + s) / cores_per_node));
        Ok(Self {
            cores_per_node,
            placement,
        })
    }

    pub fn cores_per_node(&self) -> usize {
        self.cores_per_node
    }

    pub fn node_of(&self, p: ProcId) -> usize {
        self.placement[p.0]
    }

    pub fn same_node(&self, a: ProcId, b: ProcId) -> bool {
        self.node_of(a) == self.node_of(b)
    }

    pub fn num_nodes(&self) -> usize {
        self.placement.iter().max().map_or(0, |n| n + 1)
    }

    pub fn len(&self) -> usize {
        self.placement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placement.is_empty()
    }
}

/// Latency/bandwidth cost model for point-to-point and collective traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub alpha_intra: f64,
    pub alpha_inter: f64,
    pub bandwidth: f64,
    /// Multiplier applied to the `ceil(log2 P)` round count of collectives.
    pub log_tree_factor: f64,
}

impl LatencyModel {
    pub fn new(alpha_intra: f64, alpha_inter: f64, bandwidth: f64) -> Result<Self> {
        let model = Self {
            alpha_intra,
            alpha_inter,
            bandwidth,
            log_tree_factor: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_intra >= 0.0 && self.alpha_inter >= self.alpha_intra) {
            return Err(Error::Config(format!(
                "latency model needs alpha_inter >= alpha_intra >= 0 (got {} / {})",
                self.alpha_inter, self.alpha_intra
            )));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if !(self.log_tree_factor >= 0.0) {
            return Err(Error::Config("log_tree_factor must be non-negative".into()));
        }
        Ok(())
    }

    /// Time to move `bytes` between two distinct endpoints.
    pub fn transfer(&self, same_node: bool, bytes: usize) -> f64 {
        let alpha = if same_node { self.alpha_intra } else { self.alpha_inter };
        alpha + bytes as f64 / self.bandwidth
    }

    /// `ceil(log2 p)` tree rounds, each one transfer at the given latency.
    pub fn collective(&self, members: usize, spans_nodes: bool, bytes: usize) -> f64 {
        let rounds = log2_ceil(members);
        if rounds == 0 {
            return 0.0;
        }
        self.log_tree_factor * rounds as f64 * self.transfer(!spans_nodes, bytes)
    }
}

pub fn log2_ceil(p: usize) -> u32 {
    if p <= 1 {
        0
    } else {
        usize::BITS - (p - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_in_order_with_dedicated_spare_node() {
        let map = NodeMap::new(4, 1, 2, SparePlacement::Dedicated).unwrap();
        let nodes: Vec<_> = (0..5).map(|p| map.node_of(ProcId(p))).collect();
        assert_eq!(nodes, vec![0, 0, 1, 1, 2]);
    }

    #[test]
    fn spares_go_to_later_nodes() {
        let map = NodeMap::new(32, 4, 24, SparePlacement::Dedicated).unwrap();
        let last_active = (0..32).map(|p| map.node_of(ProcId(p))).max().unwrap();
        for s in 32..36 {
            assert!(map.node_of(ProcId(s)) > last_active);
        }
        let packed = NodeMap::new(32, 4, 24, SparePlacement::Packed).unwrap();
        assert_eq!(packed.node_of(ProcId(35)), 1);
    }

    #[test]
    fn rejects_degenerate_worlds() {
        assert!(NodeMap::new(0, 1, 2, SparePlacement::Dedicated).is_err());
        assert!(NodeMap::new(2, 0, 0, SparePlacement::Dedicated).is_err());
        assert!(LatencyModel::new(1e-5, 1e-6, 1.0).is_err());
        assert!(LatencyModel::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn status_transitions() {
        use ProcessStatus::*;
        assert!(Active.can_become(Failed));
        assert!(Spare.can_become(Active));
        assert!(Spare.can_become(Failed));
        assert!(!Failed.can_become(Active));
        assert!(!Failed.can_become(Spare));
        assert!(!Active.can_become(Spare));
    }

    #[test]
    fn log2_rounds() {
        assert_eq!(log2_ceil(1), 0);
        assert_eq!(log2_ceil(2), 1);
        assert_eq!(log2_ceil(5), 3);
        assert_eq!(log2_ceil(8), 3);
        assert_eq!(log2_ceil(9), 4);
    }
}
