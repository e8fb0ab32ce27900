use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::{FaultPlan, Injection, NodeMap, ProcId, WorldConfig};

/// Built-in failure placements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanPreset {
    /// Highest ranks first, which moves the most rows under shrink.
    WorstCaseShrink,
    /// Ranks on nodes that host no spare, one node after another.
    WorstCaseSubstitute,
    /// Distinct ranks drawn from a seeded generator.
    Random,
}

impl PlanPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanPreset::WorstCaseShrink => "worst_case_shrink",
            PlanPreset::WorstCaseSubstitute => "worst_case_substitute",
            PlanPreset::Random => "random",
        }
    }
}

impl fmt::Display for PlanPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlanPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst_case_shrink" => Ok(PlanPreset::WorstCaseShrink),
            "worst_case_substitute" => Ok(PlanPreset::WorstCaseSubstitute),
            "random" => Ok(PlanPreset::Random),
            _ => Err(Error::Config(format!(
                "unknown plan preset {s:?} (expected worst_case_shrink, worst_case_substitute or random)"
            ))),
        }
    }
}

fn default_first() -> u64 {
    1
}

/// A generated plan: which ranks come from the preset, the timing from the
/// remaining fields. Failure `i` fires at outer iteration
/// `first_iteration + i * spacing`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub preset: PlanPreset,
    pub failures: usize,
    #[serde(default = "default_first")]
    pub first_iteration: u64,
    #[serde(default)]
    pub spacing: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_offset: Option<usize>,
    /// Only used by `random`; falls back to the world seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PresetSpec {
    pub fn new(preset: PlanPreset, failures: usize) -> Self {
        Self {
            preset,
            failures,
            first_iteration: 1,
            spacing: 0,
            inner_offset: None,
            seed: None,
        }
    }

    pub fn build(&self, world: &WorldConfig) -> Result<FaultPlan> {
        let ranks = match self.preset {
            PlanPreset::WorstCaseShrink => worst_case_shrink(world.processes, self.failures)?,
            PlanPreset::WorstCaseSubstitute => {
                let nodes = NodeMap::new(
                    world.processes,
                    world.spares,
                    world.cores_per_node,
                    world.spare_placement,
                )?;
                worst_case_substitute(&nodes, world.processes, self.failures)?
            }
            PlanPreset::Random => random_ranks(world.processes, self.failures, self.seed.unwrap_or(world.seed))?,
        };
        let injections = ranks
            .into_iter()
            .enumerate()
            .map(|(i, rank)| {
                let inj = Injection::new(rank, self.first_iteration + i as u64 * self.spacing);
                match self.inner_offset {
                    Some(off) => inj.at_offset(off),
                    None => inj,
                }
            })
            .collect();
        Ok(FaultPlan::new(injections))
    }
}

fn check_count(p: usize, k: usize) -> Result<()> {
    if k >= p {
        return Err(Error::Config(format!(
            "cannot fail {k} of {p} ranks and keep one alive"
        )));
    }
    Ok(())
}

/// `k` highest ranks, highest first.
pub fn worst_case_shrink(p: usize, k: usize) -> Result<Vec<usize>> {
    check_count(p, k)?;
    Ok((p - k..p).rev().collect())
}

/// Ranks on nodes disjoint from every spare node, taking the first unused
/// rank of each such node in turn.
pub fn worst_case_substitute(nodes: &NodeMap, p: usize, k: usize) -> Result<Vec<usize>> {
    check_count(p, k)?;
    let spare_nodes: BTreeSet<usize> = (p..nodes.len()).map(|s| nodes.node_of(ProcId(s))).collect();
    let mut per_node: Vec<Vec<usize>> = Vec::new();
    for r in 0..p {
        let node = nodes.node_of(ProcId(r));
        if spare_nodes.contains(&node) {
            continue;
        }
        if per_node.last().is_none_or(|v| nodes.node_of(ProcId(v[0])) != node) {
            per_node.push(Vec::new());
        }
        per_node.last_mut().unwrap().push(r);
    }
    let depth = per_node.iter().map(Vec::len).max().unwrap_or(0);
    let ranks: Vec<usize> = (0..depth)
        .flat_map(|d| per_node.iter().filter_map(move |v| v.get(d).copied()))
        .take(k)
        .collect();
    if ranks.len() < k {
        return Err(Error::Config(format!(
            "only {} ranks live on nodes without spares, {k} failures requested",
            ranks.len()
        )));
    }
    Ok(ranks)
}

/// `k` distinct ranks chosen uniformly with a ChaCha8 stream.
pub fn random_ranks(p: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_count(p, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, p, k).into_vec())
}

/// Reads a JSON list of `{rank, outer_iteration[, inner_offset]}` and checks
/// it against the world and solver shape.
pub fn load_fault_plan(
    path: &Path,
    processes: usize,
    max_outer_iterations: u64,
    inner_iterations: usize,
) -> Result<FaultPlan> {
    let text = std::fs::read_to_string(path)?;
    let plan: FaultPlan =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("fault plan {}: {e}", path.display())))?;
    plan.validate(processes, max_outer_iterations, inner_iterations)?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::SparePlacement;
    use proptest::prelude::*;

    #[test]
    fn shrink_preset_takes_the_top() {
        assert_eq!(worst_case_shrink(32, 2).unwrap(), vec![31, 30]);
        assert!(worst_case_shrink(32, 0).unwrap().is_empty());
        assert!(worst_case_shrink(4, 4).is_err());
    }

    #[test]
    fn substitute_preset_avoids_spare_nodes() {
        // P=4 on two nodes, the spare alone on node 2
        let nodes = NodeMap::new(4, 1, 2, SparePlacement::Dedicated).unwrap();
        let r = worst_case_substitute(&nodes, 4, 1).unwrap();
        assert!(nodes.node_of(ProcId(r[0])) < 2);
        assert_eq!(worst_case_substitute(&nodes, 4, 3).unwrap(), vec![0, 2, 1]);

        // packed: the spare shares node 1 with rank 3
        let nodes = NodeMap::new(4, 1, 3, SparePlacement::Packed).unwrap();
        assert_eq!(worst_case_substitute(&nodes, 4, 2).unwrap(), vec![0, 1]);
        assert_eq!(worst_case_substitute(&nodes, 4, 3).unwrap(), vec![0, 1, 2]);
        // the only node also holds the spare
        let nodes = NodeMap::new(2, 1, 3, SparePlacement::Packed).unwrap();
        assert!(worst_case_substitute(&nodes, 2, 1).is_err());
    }

    #[test]
    fn preset_timing_and_json() {
        let world = WorldConfig::new(8, 0, 2);
        let mut spec = PresetSpec::new(PlanPreset::WorstCaseShrink, 3);
        spec.first_iteration = 2;
        spec.spacing = 5;
        let plan = spec.build(&world).unwrap();
        let at: Vec<(usize, u64)> = plan.injections.iter().map(|i| (i.rank, i.outer_iteration)).collect();
        assert_eq!(at, vec![(7, 2), (6, 7), (5, 12)]);
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(
            json,
            r#"[{"rank":7,"outer_iteration":2},{"rank":6,"outer_iteration":7},{"rank":5,"outer_iteration":12}]"#
        );
        assert!(PresetSpec::new(PlanPreset::Random, 0).build(&world).unwrap().is_empty());
    }

    #[test]
    fn load_rejects_bad_plans() {
        let dir = std::env::temp_dir().join(format!("ftsim-plan-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cases = [
            (r#"[{"rank":1,"outer_iteration":2}]"#, true),
            (r#"[{"rank":9,"outer_iteration":2}]"#, false),
            (
                r#"[{"rank":1,"outer_iteration":2},{"rank":1,"outer_iteration":3}]"#,
                false,
            ),
            (r#"[{"rank":1,"outer_iteration":99}]"#, false),
            (r#"{"rank":1}"#, false),
        ];
        for (i, (text, ok)) in cases.iter().enumerate() {
            let path = dir.join(format!("p{i}.json"));
            std::fs::write(&path, text).unwrap();
            assert_eq!(load_fault_plan(&path, 4, 10, 5).is_ok(), *ok, "{text}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn random_ranks_are_distinct_and_reproducible(p in 2usize..64, k in 0usize..8, seed in any::<u64>()) {
            let k = k.min(p - 1);
            let a = random_ranks(p, k, seed).unwrap();
            prop_assert_eq!(&a, &random_ranks(p, k, seed).unwrap());
            let set: BTreeSet<usize> = a.iter().copied().collect();
            prop_assert_eq!(set.len(), k);
            prop_assert!(a.iter().all(|&r| r < p));
        }
    }
}
