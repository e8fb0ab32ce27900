use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::CheckpointPolicy;
use crate::error::{Error, Result};
use crate::recovery::RecoveryStrategy;
use crate::simcore::{FaultPlan, WorldConfig};
use crate::solver::{generate_poisson27, load_matrix_market, CsrMatrix, FaultTolerance, SolverConfig};

use super::plan::{load_fault_plan, PresetSpec};

/// Linear system to solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// 27-point Poisson on an `n³` grid.
    Poisson27 { n: usize },
    /// Square coordinate matrix from a Matrix Market file; `b = A · 1`.
    MatrixMarket { path: PathBuf },
}

impl ProblemSpec {
    pub fn build(&self, base: &Path) -> Result<(CsrMatrix, Vec<f64>)> {
        match self {
            ProblemSpec::Poisson27 { n } => generate_poisson27(*n),
            ProblemSpec::MatrixMarket { path } => load_matrix_market(&base.join(path)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Poisson27 { n } => format!("poisson27_n{n}"),
            ProblemSpec::MatrixMarket { path } => {
                let stem = path
                    .file_stem()
                    .map_or_else(|| "matrix".into(), |s| s.to_string_lossy());
                format!("mm_{stem}")
            }
        }
    }
}

/// Where the fault plan comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanSpec {
    Inline(FaultPlan),
    File { path: PathBuf },
    Preset(PresetSpec),
}

fn one() -> usize {
    1
}

/// One simulated run, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub strategy: RecoveryStrategy,
    #[serde(default)]
    pub checkpoint: CheckpointPolicy,
    /// Buddy copies per snapshot.
    #[serde(default = "one")]
    pub redundancy: usize,
    #[serde(default)]
    pub fallback_to_shrink: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proactive_barrier_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_plan: Option<PlanSpec>,
    /// Run without any protection; the row is its own baseline.
    #[serde(default)]
    pub baseline: bool,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(world: WorldConfig, problem: ProblemSpec) -> Self {
        Self {
            world,
            solver: SolverConfig::default(),
            problem,
            strategy: RecoveryStrategy::default(),
            checkpoint: CheckpointPolicy::default(),
            redundancy: 1,
            fallback_to_shrink: false,
            proactive_barrier_every: None,
            fault_plan: None,
            baseline: false,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything except the plan-dependent rules.
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.solver.validate()?;
        self.checkpoint.validate()?;
        if self.redundancy == 0 {
            return Err(Error::Config("redundancy must be at least 1".into()));
        }
        if let ProblemSpec::Poisson27 { n: 0 } = self.problem {
            return Err(Error::Config("poisson27 needs n >= 1".into()));
        }
        Ok(())
    }

    pub fn fault_tolerance(&self) -> FaultTolerance {
        if self.baseline {
            return FaultTolerance::disabled();
        }
        FaultTolerance {
            checkpoint: self.checkpoint,
            redundancy: self.redundancy,
            strategy: self.strategy,
            fallback_to_shrink: self.fallback_to_shrink,
            proactive_barrier_every: self.proactive_barrier_every,
        }
    }

    pub fn resolve_plan(&self) -> Result<FaultPlan> {
        let (procs, steps, inner) = (self.world.processes, self.solver.max_steps(), self.solver.m_inner);
        let plan = match &self.fault_plan {
            None => FaultPlan::empty(),
            Some(PlanSpec::Inline(p)) => p.clone(),
            Some(PlanSpec::File { path }) => load_fault_plan(&self.base_dir.join(path), procs, steps, inner)?,
            Some(PlanSpec::Preset(spec)) => spec.build(&self.world)?,
        };
        self.check_plan(&plan)?;
        Ok(plan)
    }

    /// Plan against world, solver and strategy.
    pub fn check_plan(&self, plan: &FaultPlan) -> Result<()> {
        plan.validate(self.world.processes, self.solver.max_steps(), self.solver.m_inner)?;
        if !self.baseline
            && self.strategy == RecoveryStrategy::Substitute
            && !self.fallback_to_shrink
            && plan.len() > self.world.spares
        {
            return Err(Error::Config(format!(
                "substitute needs a spare per failure: {} planned, {} spares (set fallback_to_shrink to allow)",
                plan.len(),
                self.world.spares
            )));
        }
        Ok(())
    }
}
