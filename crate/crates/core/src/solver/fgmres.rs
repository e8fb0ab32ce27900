use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{
    checkpoint_dynamic, checkpoint_static, latest_consistent_tag, Cadence, CheckpointPolicy, SnapshotKind, StoreTable,
};
use crate::error::{Error, Result};
use crate::recovery::{
    execute_shrink, execute_substitute, plan_shrink_transfers, stitch_spare, HostingView, PhaseMeter, RecoveryReport,
    RecoveryStrategy, Restored, RowBlock,
};
use crate::simcore::{CommEpoch, Phase, ProcId, World};

use super::gmres::{inner_solve, Hessenberg};
use super::matrix::{DistMatrix, LocalRows};
use super::state::{RankState, Replicated, SolverState};
use super::vector::{axpy, combine, dot, norm2, scale, spmv, sub, DistVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Target for `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    /// Outer iterations per cycle before restarting.
    pub m_outer: usize,
    /// Inner GMRES iterations per outer iteration.
    pub m_inner: usize,
    /// Maximum number of outer cycles.
    pub max_outer: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            m_outer: 30,
            m_inner: 25,
            max_outer: 20,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.m_outer == 0 || self.m_inner == 0 || self.max_outer == 0 {
            return Err(Error::Config(
                "m_outer, m_inner and max_outer must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Upper bound on outer iterations over all cycles.
    pub fn max_steps(&self) -> u64 {
        (self.m_outer * self.max_outer) as u64
    }
}

/// Checkpointing and recovery settings of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultTolerance {
    pub checkpoint: CheckpointPolicy,
    /// Buddy copies per snapshot.
    pub redundancy: usize,
    pub strategy: RecoveryStrategy,
    pub fallback_to_shrink: bool,
    /// Barrier every this many outer iterations to surface failures early.
    pub proactive_barrier_every: Option<u64>,
}

impl FaultTolerance {
    /// No checkpoints; any failure ends the run.
    pub fn disabled() -> Self {
        Self {
            checkpoint: CheckpointPolicy::Disabled,
            redundancy: 1,
            strategy: RecoveryStrategy::Shrink,
            fallback_to_shrink: false,
            proactive_barrier_every: None,
        }
    }

    pub fn protected(&self) -> bool {
        self.checkpoint.enabled()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub converged: bool,
    /// Outer iterations on the final trajectory.
    pub steps: u64,
    pub cycles: u64,
    /// Inner iterations executed, re-executions included.
    pub inner_iterations: u64,
    /// Inner iterations executed again after a rollback.
    pub recomputed_inner_iterations: u64,
    pub checkpoints: u64,
    pub checkpoint_interval: Option<u64>,
    pub failures: usize,
    pub recoveries: Vec<RecoveryReport>,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub bytes_checkpointed: u64,
    pub bytes_recovered: u64,
    pub checkpoint_log: Vec<CheckpointRecord>,
    pub final_ranks: usize,
}

/// One dynamic checkpoint as taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRecord {
    pub tag: u64,
    pub ranks: usize,
    /// Largest per-rank payload.
    pub max_payload: usize,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub stats: SolveStats,
    pub stores: StoreTable,
}

/// Distributed inner–outer flexible GMRES with checkpoint/restart.
///
/// Each outer iteration preconditions the newest Arnoldi vector with an
/// inner GMRES solve; the dynamic state is checkpointed after outer
/// iterations chosen by the policy. A process failure anywhere rolls every
/// rank back to the newest consistent checkpoint after the configured
/// recovery, and the solve resumes at the top of the outer block.
pub fn fgmres(world: &mut World, matrix: DistMatrix, cfg: &SolverConfig, ft: &FaultTolerance) -> Result<SolveOutcome> {
    cfg.validate()?;
    ft.checkpoint.validate()?;
    if matrix.ranks() != world.size() {
        return Err(Error::InvalidArgument(format!(
            "matrix distributed over {} ranks, world has {}",
            matrix.ranks(),
            world.size()
        )));
    }
    let stores = StoreTable::new(world.total_procs());
    Driver {
        stores,
        matrix,
        cfg: *cfg,
        ft: *ft,
        cadence: Cadence::new(ft.checkpoint),
        stats: SolveStats::default(),
        world,
    }
    .run()
}

struct Driver<'w> {
    world: &'w mut World,
    stores: StoreTable,
    matrix: DistMatrix,
    cfg: SolverConfig,
    ft: FaultTolerance,
    cadence: Cadence,
    stats: SolveStats,
}

enum Progress {
    Running,
    Finished(DistVector, f64),
}

#[derive(Default)]
struct InnerCounters {
    executed: u64,
    replayed: u64,
}

/// Kills whatever the plan schedules at this point; a dead process's memory
/// goes with it.
fn fault_point(world: &mut World, stores: &mut StoreTable, step: u64, inner: usize) {
    for p in world.poll_faults(step, inner) {
        stores.destroy(p);
    }
}

impl Driver<'_> {
    fn run(mut self) -> Result<SolveOutcome> {
        self.world.set_phase(Phase::Useful);
        if self.ft.protected() {
            let payloads = self.matrix.blocks.iter().map(RowBlock::encode).collect();
            self.world.set_phase(Phase::Checkpoint);
            let rep = checkpoint_static(self.world, &mut self.stores, self.ft.redundancy, payloads, 0)?;
            self.world.set_phase(Phase::Useful);
            self.stats.bytes_checkpointed += rep.bytes;
        }
        let mut b = self.matrix.rhs();
        let mut state = self.initial_state(&b)?;
        if self.ft.protected() {
            self.checkpoint(&mut state)?;
        }
        loop {
            match self.advance(&mut state, &b) {
                Ok(Progress::Running) => {}
                Ok(Progress::Finished(x, rel)) => return Ok(self.finish(state, x, rel)),
                Err(Error::ProcFailed { failed, observers }) => {
                    if !self.ft.protected() {
                        return Err(Error::Unrecoverable(format!(
                            "process failure ({}) with fault tolerance disabled",
                            join(&failed)
                        )));
                    }
                    state = self.recover(&failed, &observers)?;
                    b = self.matrix.rhs();
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn initial_state(&mut self, b: &DistVector) -> Result<SolverState> {
        let bnorm = norm2(self.world, b)?;
        let mut v0 = b.clone();
        if bnorm > 0.0 {
            scale(self.world, 1.0 / bnorm, &mut v0);
        }
        Ok(SolverState {
            x_seed: DistVector::zeros(&self.matrix.dist),
            v: vec![v0],
            z: Vec::new(),
            rep: Replicated {
                hess: Hessenberg::new(bnorm),
                bnorm,
                residual_history: vec![if bnorm > 0.0 { 1.0 } else { 0.0 }],
                ..Replicated::default()
            },
        })
    }

    fn cycle_done(&self, s: &SolverState) -> bool {
        s.rep.bnorm == 0.0
            || s.j() >= self.cfg.m_outer
            || s.rep.breakdown
            || (s.j() > 0 && s.rep.hess.residual() <= self.cfg.tol * s.rep.bnorm)
    }

    fn advance(&mut self, s: &mut SolverState, b: &DistVector) -> Result<Progress> {
        if self.cycle_done(s) {
            return self.close_cycle(s, b);
        }
        let t = s.rep.step + 1;
        let j = s.j();
        let stores = &mut self.stores;
        let mut counters = InnerCounters::default();
        let inner = inner_solve(self.world, &self.matrix, &s.v[j], self.cfg.m_inner, |w, k| {
            fault_point(w, stores, t, k);
            counters.executed += 1;
            counters.replayed += u64::from(w.replaying());
        });
        self.stats.inner_iterations += counters.executed;
        self.stats.recomputed_inner_iterations += counters.replayed;
        let inner = inner?;
        fault_point(self.world, &mut self.stores, t, self.cfg.m_inner);

        let step_start = self.world.now();
        let mut w = spmv(self.world, &self.matrix, &inner.z)?;
        let mut col = Vec::with_capacity(j + 2);
        for vi in &s.v {
            let h = dot(self.world, &w, vi)?;
            axpy(self.world, -h, vi, &mut w);
            col.push(h);
        }
        let hn = norm2(self.world, &w)?;
        col.push(hn);
        s.rep.breakdown = s.rep.hess.push(col);
        if !s.rep.breakdown {
            scale(self.world, 1.0 / hn, &mut w);
            s.v.push(w);
        }
        s.z.push(inner.z);
        s.rep.step = t;

        if let Some(k) = self.ft.proactive_barrier_every {
            if k > 0 && t % k == 0 {
                let prev = self.world.set_phase(Phase::Detection);
                let res = self.world.barrier();
                self.world.set_phase(prev);
                res?;
            }
        }
        if self.ft.protected() && self.cadence.due(t) {
            let outer_s = self.world.now() - step_start;
            let cost = self.checkpoint(s)?;
            if self.cadence.interval().is_none() {
                self.cadence.calibrate(cost, outer_s)?;
            }
        }
        Ok(Progress::Running)
    }

    /// Forms the cycle's iterate and either finishes or restarts from it.
    fn close_cycle(&mut self, s: &mut SolverState, b: &DistVector) -> Result<Progress> {
        let y = s.rep.hess.solve();
        let x = combine(self.world, &s.x_seed, &y, &s.z);
        if s.rep.bnorm == 0.0 {
            return Ok(Progress::Finished(x, 0.0));
        }
        let ax = spmv(self.world, &self.matrix, &x)?;
        let mut r = sub(self.world, b, &ax);
        let rnorm = norm2(self.world, &r)?;
        let rel = rnorm / s.rep.bnorm;
        if rel <= self.cfg.tol || s.rep.cycle + 1 >= self.cfg.max_outer as u64 || rnorm == 0.0 {
            return Ok(Progress::Finished(x, rel));
        }
        scale(self.world, 1.0 / rnorm, &mut r);
        s.x_seed = x;
        s.v = vec![r];
        s.z.clear();
        s.rep.hess = Hessenberg::new(rnorm);
        s.rep.breakdown = false;
        s.rep.cycle += 1;
        s.rep.residual_history.push(rel);
        Ok(Progress::Running)
    }

    fn checkpoint(&mut self, s: &mut SolverState) -> Result<f64> {
        s.rep.ops = self.world.work_ops();
        let payloads = s.payloads(&self.matrix.dist);
        let max_payload = payloads.iter().map(Vec::len).max().unwrap_or(0);
        let prev = self.world.set_phase(Phase::Checkpoint);
        let res = checkpoint_dynamic(self.world, &mut self.stores, self.ft.redundancy, payloads, s.rep.step);
        self.world.set_phase(prev);
        let rep = res?;
        self.stats.checkpoints += 1;
        self.stats.bytes_checkpointed += rep.bytes;
        self.stats.checkpoint_log.push(CheckpointRecord {
            tag: s.rep.step,
            ranks: self.world.size(),
            max_payload,
            cost: rep.cost,
        });
        Ok(rep.cost)
    }

    fn recover(&mut self, failed: &BTreeSet<ProcId>, observers: &BTreeSet<ProcId>) -> Result<SolverState> {
        let meter = PhaseMeter::start(self.world);
        let lost_at = self.world.work_ops();
        self.world.replay_until(lost_at);

        self.world.set_phase(Phase::Detection);
        let observed: BTreeMap<ProcId, BTreeSet<ProcId>> = observers.iter().map(|&o| (o, failed.clone())).collect();
        let agreement = self.world.detect_and_propagate(&observed)?;
        for &p in &agreement.failed {
            self.stores.destroy(p);
        }
        let old = self.world.comm().clone();
        let failed_ranks: Vec<usize> = (0..old.size())
            .filter(|&r| agreement.failed.contains(&old.members[r]))
            .collect();
        self.stats.failures += failed_ranks.len();

        self.world.set_phase(Phase::Reconfiguration);
        self.world.shrink_comm()?;
        let mut strategy = self.ft.strategy;
        if strategy == RecoveryStrategy::Substitute {
            match stitch_spare(self.world, &old, &failed_ranks) {
                Ok(_) => {}
                Err(e) if e.is_unrecoverable() && self.ft.fallback_to_shrink => {
                    strategy = RecoveryStrategy::Shrink;
                }
                Err(e) => return Err(e),
            }
        }

        self.world.set_phase(Phase::Recovery);
        let tag = latest_consistent_tag(self.world, &self.stores, &old, &failed_ranks)?;
        let restored: Restored<LocalRows, RankState> = match strategy {
            RecoveryStrategy::Shrink => {
                let failed_set: BTreeSet<usize> = failed_ranks.iter().copied().collect();
                let view = self.hosting_view(&old, tag)?;
                let plan = plan_shrink_transfers(&self.matrix.dist, &failed_set, &view)?;
                let restored = execute_shrink(self.world, &mut self.stores, &old, &plan, tag, self.ft.redundancy)?;
                self.world.set_phase(Phase::Reconfiguration);
                self.matrix = DistMatrix::from_blocks(restored.statics.clone())?;
                self.matrix.exchange_import_lists(self.world)?;
                restored
            }
            RecoveryStrategy::Substitute => {
                let restored =
                    execute_substitute(self.world, &mut self.stores, &failed_ranks, tag, self.ft.redundancy)?;
                // Same distribution, so the import patterns still hold.
                self.matrix.blocks = restored.statics.clone();
                restored
            }
        };
        self.stats.bytes_recovered += restored.report.bytes_moved;
        let state = SolverState::from_ranks(restored.dynamics)?;
        self.world.rewind_work_ops(state.rep.ops);
        self.world.set_phase(Phase::Useful);

        let mut report = meter.report(self.world, strategy, restored.report.bytes_moved, failed_ranks);
        // The failing operation charged its timeout before we got here.
        report.t_pfd += self.world.config().detection_timeout_s;
        self.stats.recoveries.push(report);
        Ok(state)
    }

    /// Which surviving old ranks hold usable copies of each owner's state.
    fn hosting_view(&self, old: &CommEpoch, tag: u64) -> Result<HostingView> {
        let mut view = HostingView::new();
        for (h, &p) in old.members.iter().enumerate() {
            let Ok(store) = self.stores.get(p) else { continue };
            for owner in 0..old.size() {
                let has_static = store.get(owner, SnapshotKind::Static).is_some();
                let has_dynamic = store.get(owner, SnapshotKind::Dynamic).is_some_and(|s| s.tag == tag);
                if has_static && has_dynamic {
                    view.add(owner, h);
                }
            }
        }
        Ok(view)
    }

    fn finish(mut self, state: SolverState, x: DistVector, rel: f64) -> SolveOutcome {
        self.stats.converged = rel <= self.cfg.tol;
        self.stats.relative_residual = rel;
        self.stats.steps = state.rep.step;
        self.stats.cycles = state.rep.cycle + 1;
        self.stats.residual_history = state.rep.residual_history.clone();
        self.stats.residual_history.push(rel);
        self.stats.checkpoint_interval = self.cadence.interval();
        self.stats.final_ranks = self.world.size();
        SolveOutcome {
            x: x.gather(),
            stats: self.stats,
            stores: self.stores,
        }
    }
}

fn join(procs: &BTreeSet<ProcId>) -> String {
    procs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}
