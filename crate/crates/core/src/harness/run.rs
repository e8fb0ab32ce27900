use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::recovery::BlockDistribution;
use crate::simcore::{FaultPlan, Phase, World};
use crate::solver::{fgmres, DistMatrix, SolveOutcome};

use super::config::ExperimentConfig;
use super::report::{OverheadBreakdown, ResultRow, RunStatus};

/// Everything one simulated run produced.
#[derive(Debug)]
pub struct RunRecord {
    pub row: ResultRow,
    pub plan: FaultPlan,
    /// Present unless the run died.
    pub outcome: Option<SolveOutcome>,
    /// Why the run died.
    pub error: Option<Error>,
    pub world: World,
}

impl RunRecord {
    pub fn x(&self) -> Option<&[f64]> {
        self.outcome.as_ref().map(|o| o.x.as_slice())
    }
}

fn strategy_label(cfg: &ExperimentConfig) -> &'static str {
    if cfg.baseline {
        "baseline"
    } else {
        cfg.strategy.as_str()
    }
}

/// Runs `cfg` under `plan` and normalizes by `baseline_total` (the run's
/// own total when `None`). Unrecoverable failures become a row with that
/// status; any other error is returned.
pub fn execute(cfg: &ExperimentConfig, plan: &FaultPlan, baseline_total: Option<f64>) -> Result<RunRecord> {
    cfg.validate()?;
    cfg.check_plan(plan)?;
    let (a, b) = cfg.problem.build(&cfg.base_dir)?;
    let mut world = World::new(&cfg.world)?;
    world.arm_faults(plan, cfg.solver.m_inner)?;
    let dist = BlockDistribution::canonical(a.n, cfg.world.processes)?;
    let matrix = DistMatrix::from_global(&a, &b, dist)?;

    let (outcome, error, status) = match fgmres(&mut world, matrix, &cfg.solver, &cfg.fault_tolerance()) {
        Ok(out) => {
            let status = if out.stats.converged {
                RunStatus::Converged
            } else {
                RunStatus::NotConverged
            };
            (Some(out), None, status)
        }
        Err(e) if e.is_unrecoverable() => (None, Some(e), RunStatus::Unrecoverable),
        Err(e) => return Err(e),
    };

    let clock = world.clock();
    let mut breakdown = OverheadBreakdown::from_clock(clock);
    breakdown.bytes_checkpointed = clock.phase_bytes(Phase::Checkpoint);
    breakdown.bytes_recovered = clock.phase_bytes(Phase::Recovery);
    let total = clock.now();
    let fired = plan.len() - world.pending_faults();
    let mut row = ResultRow::new(
        cfg.world.processes,
        strategy_label(cfg),
        fired,
        total,
        breakdown,
        baseline_total.unwrap_or(total),
        status,
    );
    row.problem = cfg.problem.label();
    Ok(RunRecord {
        row,
        plan: plan.clone(),
        outcome,
        error,
        world,
    })
}

/// The unprotected, failure-free run of the same world, solver and problem.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let mut base = cfg.clone();
    base.baseline = true;
    base.fault_plan = None;
    execute(&base, &FaultPlan::empty(), None)
}

/// Baseline plus the configured run; returns the configured run.
pub fn run_detailed(cfg: &ExperimentConfig, plan: &FaultPlan) -> Result<RunRecord> {
    let base = run_baseline(cfg)?;
    if base.row.status == RunStatus::Unrecoverable {
        return Err(Error::Config("the failure-free baseline did not complete".into()));
    }
    execute(cfg, plan, Some(base.row.total_s))
}

/// One row for one config, its plan resolved from the config itself.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRow> {
    cfg.validate()?;
    let plan = cfg.resolve_plan()?;
    Ok(run_detailed(cfg, &plan)?.row)
}

/// Runs every config in order. Baselines are shared between configs with
/// the same world, solver and problem.
pub fn run_sweep(cfgs: &[ExperimentConfig]) -> Result<Vec<ResultRow>> {
    let mut baselines: BTreeMap<String, f64> = BTreeMap::new();
    let mut rows = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        cfg.validate()?;
        let plan = cfg.resolve_plan()?;
        let key = serde_json::to_string(&(&cfg.world, &cfg.solver, &cfg.problem, &cfg.base_dir))?;
        let base = match baselines.get(&key) {
            Some(&t) => t,
            None => {
                let t = run_baseline(cfg)?.row.total_s;
                baselines.insert(key, t);
                t
            }
        };
        rows.push(execute(cfg, &plan, Some(base))?.row);
    }
    Ok(rows)
}

/// Every `*.json` file of `dir`, sorted by file name.
pub fn load_configs(dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::Config(format!("cannot list {}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no *.json configs in {}", dir.display())));
    }
    paths.iter().map(|p| ExperimentConfig::load(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{PlanSpec, ProblemSpec};
    use crate::recovery::RecoveryStrategy;
    use crate::simcore::{Injection, WorldConfig};
    use crate::solver::SolverConfig;

    fn cfg(strategy: RecoveryStrategy) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(WorldConfig::new(4, 1, 2), ProblemSpec::Poisson27 { n: 8 });
        c.solver = SolverConfig {
            tol: 1e-8,
            m_outer: 10,
            m_inner: 2,
            max_outer: 6,
        };
        c.strategy = strategy;
        c
    }

    #[test]
    fn clean_protected_run_only_pays_for_checkpoints() {
        let row = run_experiment(&cfg(RecoveryStrategy::Shrink)).unwrap();
        assert_eq!(row.status, RunStatus::Converged);
        assert_eq!(row.failures, 0);
        let b = row.breakdown;
        assert!(b.t_check > 0.0);
        assert_eq!((b.t_pfd, b.t_pfr, b.t_pfx, b.t_recompute), (0.0, 0.0, 0.0, 0.0));
        assert!(row.slowdown > 1.0);
        assert!(row.closure_error() <= 1e-12);
    }

    #[test]
    fn baseline_identity() {
        let mut c = cfg(RecoveryStrategy::Shrink);
        c.checkpoint = crate::checkpoint::CheckpointPolicy::Disabled;
        let protected_off = execute(&c, &FaultPlan::empty(), None).unwrap();
        let base = run_baseline(&c).unwrap();
        assert_eq!(protected_off.row.total_s, base.row.total_s);
        assert_eq!(protected_off.x(), base.x());
    }

    #[test]
    fn failures_cost_time_and_are_counted() {
        let mut c = cfg(RecoveryStrategy::Substitute);
        c.fault_plan = Some(PlanSpec::Inline(FaultPlan::new(vec![Injection::new(1, 2)])));
        let one = run_experiment(&c).unwrap();
        assert_eq!((one.failures, one.status), (1, RunStatus::Converged));
        let clean = run_experiment(&cfg(RecoveryStrategy::Substitute)).unwrap();
        assert!(one.total_s > clean.total_s);
        assert!(one.breakdown.t_pfd > 0.0 && one.breakdown.t_recompute > 0.0);
        assert!(one.breakdown.bytes_recovered > 0);
    }

    #[test]
    fn unrecoverable_runs_are_rows() {
        let mut c = cfg(RecoveryStrategy::Shrink);
        c.baseline = true;
        c.fault_plan = Some(PlanSpec::Inline(FaultPlan::new(vec![Injection::new(1, 2)])));
        let row = run_experiment(&c).unwrap();
        assert_eq!(row.status, RunStatus::Unrecoverable);
        assert_eq!(row.strategy, "baseline");
        assert_eq!(row.failures, 1);
    }

    #[test]
    fn sweep_is_repeatable() {
        let mut cfgs = vec![cfg(RecoveryStrategy::Shrink), cfg(RecoveryStrategy::Substitute)];
        for c in &mut cfgs {
            c.fault_plan = Some(PlanSpec::Inline(FaultPlan::new(vec![Injection::new(3, 3)])));
        }
        let a = run_sweep(&cfgs).unwrap();
        assert_eq!(a, run_sweep(&cfgs).unwrap());
        let base = run_baseline(&cfgs[0]).unwrap().row.total_s;
        assert!((a[0].slowdown * base - a[0].total_s).abs() <= 1e-12 * a[0].total_s);
    }
}
