use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::fault::{FaultPlan, ResolvedInjection};
use super::types::{LatencyModel, NodeMap, ProcId, ProcessStatus, RankId, SparePlacement};
use crate::error::{Error, Result};

fn default_flop_time() -> f64 {
    1e-9
}

fn default_detection_timeout() -> f64 {
    1e-3
}

fn default_log_tree_factor() -> f64 {
    1.0
}

/// World parameters as read from the JSON config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub processes: usize,
    #[serde(default)]
    pub spares: usize,
    pub cores_per_node: usize,
    pub alpha_intra: f64,
    pub alpha_inter: f64,
    pub bandwidth_bytes_per_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_detection_timeout")]
    pub detection_timeout_s: f64,
    /// Seconds per floating point operation of modeled local compute.
    #[serde(default = "default_flop_time")]
    pub flop_time_s: f64,
    #[serde(default)]
    pub spare_placement: SparePlacement,
    #[serde(default = "default_log_tree_factor")]
    pub log_tree_factor: f64,
}

impl WorldConfig {
    pub fn new(processes: usize, spares: usize, cores_per_node: usize) -> Self {
        Self {
            processes,
            spares,
            cores_per_node,
            alpha_intra: 1e-6,
            alpha_inter: 5e-5,
            bandwidth_bytes_per_s: 215e6,
            seed: 0,
            detection_timeout_s: default_detection_timeout(),
            flop_time_s: default_flop_time(),
            spare_placement: SparePlacement::Dedicated,
            log_tree_factor: 1.0,
        }
    }

    pub fn latency(&self) -> LatencyModel {
        LatencyModel {
            alpha_intra: self.alpha_intra,
            alpha_inter: self.alpha_inter,
            bandwidth: self.bandwidth_bytes_per_s,
            log_tree_factor: self.log_tree_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.processes == 0 {
            return Err(Error::Config("processes must be at least 1".into()));
        }
        if self.cores_per_node == 0 {
            return Err(Error::Config("cores_per_node must be positive".into()));
        }
        if !(self.detection_timeout_s >= 0.0) || !(self.flop_time_s >= 0.0) {
            return Err(Error::Config("timeouts and flop time must be non-negative".into()));
        }
        self.latency().validate()
    }
}

/// Accounting bucket that simulated time is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Useful,
    Checkpoint,
    Detection,
    Reconfiguration,
    Recovery,
    Recompute,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Useful,
        Phase::Checkpoint,
        Phase::Detection,
        Phase::Reconfiguration,
        Phase::Recovery,
        Phase::Recompute,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Simulated time. Never touches the wall clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SimClock {
    now: f64,
    phase_time: [f64; 6],
    phase_bytes: [u64; 6],
    compute: Vec<f64>,
    comm: Vec<f64>,
}

impl SimClock {
    fn new(procs: usize) -> Self {
        Self {
            now: 0.0,
            phase_time: [0.0; 6],
            phase_bytes: [0; 6],
            compute: vec![0.0; procs],
            comm: vec![0.0; procs],
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn phase_time(&self, phase: Phase) -> f64 {
        self.phase_time[phase.index()]
    }

    pub fn phase_bytes(&self, phase: Phase) -> u64 {
        self.phase_bytes[phase.index()]
    }

    /// Accumulated modeled compute seconds of one process.
    pub fn compute_time(&self, p: ProcId) -> f64 {
        self.compute[p.0]
    }

    /// Accumulated seconds a process spent sending or receiving.
    pub fn comm_time(&self, p: ProcId) -> f64 {
        self.comm[p.0]
    }
}

/// One generation of communicator membership.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEpoch {
    pub epoch: u64,
    pub members: Vec<ProcId>,
    pub failed: BTreeSet<ProcId>,
}

impl CommEpoch {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn proc_of(&self, rank: RankId) -> ProcId {
        self.members[rank.0]
    }

    pub fn rank_of(&self, p: ProcId) -> Option<RankId> {
        self.members.iter().position(|&m| m == p).map(RankId)
    }

    /// Survivors in their original order, with the epoch bumped.
    pub fn shrunk(&self, failed: &BTreeSet<ProcId>) -> Result<CommEpoch> {
        let members: Vec<ProcId> = self.members.iter().copied().filter(|p| !failed.contains(p)).collect();
        if members.is_empty() {
            return Err(Error::Unrecoverable(
                "every member of the communicator has failed".into(),
            ));
        }
        let mut known = self.failed.clone();
        known.extend(failed.iter().copied());
        Ok(CommEpoch {
            epoch: self.epoch + 1,
            members,
            failed: known,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollectiveKind {
    Barrier,
    Allreduce,
    Broadcast,
    Allgather,
    Agreement,
}

/// A point-to-point message posted in some communicator epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub src: ProcId,
    pub dst: ProcId,
    pub bytes: usize,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TraceKind {
    Compute {
        max_flops: f64,
    },
    Deliver {
        src: ProcId,
        dst: ProcId,
        bytes: usize,
    },
    Collective {
        kind: CollectiveKind,
        members: usize,
        bytes: usize,
    },
    Kill(ProcId),
    Detected {
        failed: Vec<ProcId>,
    },
    Epoch {
        epoch: u64,
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
}

/// Result of the failure-agreement round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agreement {
    pub failed: BTreeSet<ProcId>,
    /// What each surviving member believes after the round.
    pub views: BTreeMap<ProcId, BTreeSet<ProcId>>,
}

impl Agreement {
    pub fn is_unanimous(&self) -> bool {
        self.views.values().all(|v| *v == self.failed)
    }
}

/// One all-to-all exchange of failure knowledge among `survivors`. Each
/// delivery merges the sender's current view into the receiver's; a member
/// that never answers (not in `survivors`) is added by everyone at the end of
/// the round.
pub fn consensus_round(
    members: &[ProcId],
    survivors: &BTreeSet<ProcId>,
    initial: &BTreeMap<ProcId, BTreeSet<ProcId>>,
    delivery_order: &[(ProcId, ProcId)],
) -> BTreeMap<ProcId, BTreeSet<ProcId>> {
    let mut views: BTreeMap<ProcId, BTreeSet<ProcId>> = survivors
        .iter()
        .map(|p| (*p, initial.get(p).cloned().unwrap_or_default()))
        .collect();
    for &(from, to) in delivery_order {
        if from == to || !survivors.contains(&from) || !survivors.contains(&to) {
            continue;
        }
        let sent = views[&from].clone();
        views.get_mut(&to).unwrap().extend(sent);
    }
    let silent: BTreeSet<ProcId> = members.iter().copied().filter(|m| !survivors.contains(m)).collect();
    for view in views.values_mut() {
        view.extend(silent.iter().copied());
    }
    views
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Stamp(u64, u64);

fn stamp(t: f64, seq: u64) -> Stamp {
    // Non-negative finite times keep their ordering as raw bits.
    debug_assert!(t >= 0.0 && t.is_finite());
    Stamp(t.to_bits(), seq)
}

/// The simulated message-passing world.
///
/// All operations are executed by a single driver on behalf of every member
/// of the current epoch (lockstep SPMD); each one advances the global clock
/// by its modeled cost and charges it to the current [`Phase`].
#[derive(Debug, Clone)]
pub struct World {
    cfg: WorldConfig,
    nodes: NodeMap,
    latency: LatencyModel,
    status: Vec<ProcessStatus>,
    comm: CommEpoch,
    clock: SimClock,
    phase: Phase,
    faults: Vec<ResolvedInjection>,
    trace: Vec<TraceEvent>,
    work_ops: u64,
    replay_until: u64,
}

impl World {
    pub fn new(cfg: &WorldConfig) -> Result<World> {
        cfg.validate()?;
        let nodes = NodeMap::new(cfg.processes, cfg.spares, cfg.cores_per_node, cfg.spare_placement)?;
        let total = cfg.processes + cfg.spares;
        let mut status = vec![ProcessStatus::Active; cfg.processes];
        status.extend(std::iter::repeat_n(ProcessStatus::Spare, cfg.spares));
        Ok(World {
            latency: cfg.latency(),
            cfg: cfg.clone(),
            nodes,
            status,
            comm: CommEpoch {
                epoch: 0,
                members: (0..cfg.processes).map(ProcId).collect(),
                failed: BTreeSet::new(),
            },
            clock: SimClock::new(total),
            phase: Phase::Useful,
            faults: Vec::new(),
            trace: Vec::new(),
            work_ops: 0,
            replay_until: 0,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &NodeMap {
        &self.nodes
    }

    pub fn latency(&self) -> &LatencyModel {
        &self.latency
    }

    pub fn comm(&self) -> &CommEpoch {
        &self.comm
    }

    pub fn size(&self) -> usize {
        self.comm.size()
    }

    pub fn proc_of(&self, rank: RankId) -> ProcId {
        self.comm.proc_of(rank)
    }

    pub fn rank_of(&self, p: ProcId) -> Option<RankId> {
        self.comm.rank_of(p)
    }

    pub fn status(&self, p: ProcId) -> ProcessStatus {
        self.status[p.0]
    }

    pub fn total_procs(&self) -> usize {
        self.status.len()
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn now(&self) -> f64 {
        self.clock.now
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Switches the accounting bucket, returning the previous one.
    pub fn set_phase(&mut self, phase: Phase) -> Phase {
        std::mem::replace(&mut self.phase, phase)
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    fn advance(&mut self, dt: f64, bytes: u64) {
        debug_assert!(dt >= 0.0);
        let mut phase = self.phase;
        if phase == Phase::Useful {
            if self.work_ops < self.replay_until {
                phase = Phase::Recompute;
            }
            self.work_ops += 1;
        }
        self.clock.now += dt;
        self.clock.phase_time[phase.index()] += dt;
        self.clock.phase_bytes[phase.index()] += bytes;
    }

    /// Number of completed application operations (those run in the
    /// `Useful` phase, replays included).
    pub fn work_ops(&self) -> u64 {
        self.work_ops
    }

    /// Rewinds the operation counter to a checkpointed value.
    pub fn rewind_work_ops(&mut self, ops: u64) {
        self.work_ops = ops;
    }

    /// Whether the next application operation re-executes lost work.
    pub fn replaying(&self) -> bool {
        self.work_ops < self.replay_until
    }

    /// Marks every application operation numbered below `ops` as already
    /// done once: re-executing them is charged as recomputation.
    pub fn replay_until(&mut self, ops: u64) {
        self.replay_until = self.replay_until.max(ops);
    }

    fn advance_in(&mut self, phase: Phase, dt: f64) {
        let prev = self.set_phase(phase);
        self.advance(dt, 0);
        self.set_phase(prev);
    }

    fn record(&mut self, kind: TraceKind) {
        self.trace.push(TraceEvent {
            time: self.clock.now,
            kind,
        });
    }

    /// Raises `ProcFailed` if any of `procs` has failed. The observers are the
    /// live processes among `procs`; the detection timeout is charged first.
    fn check_alive(&mut self, procs: &BTreeSet<ProcId>) -> Result<()> {
        let failed: BTreeSet<ProcId> = procs
            .iter()
            .copied()
            .filter(|p| self.status[p.0] == ProcessStatus::Failed)
            .collect();
        if failed.is_empty() {
            return Ok(());
        }
        let observers = procs.difference(&failed).copied().collect();
        self.advance_in(Phase::Detection, self.cfg.detection_timeout_s);
        Err(Error::ProcFailed { failed, observers })
    }

    /// Local computation on every member; `flops[r]` is rank r's work.
    /// Costs the slowest member's time.
    pub fn compute(&mut self, flops: &[f64]) -> f64 {
        assert_eq!(flops.len(), self.size(), "one flop count per member");
        let mut worst = 0.0f64;
        for (r, &f) in flops.iter().enumerate() {
            let p = self.comm.members[r];
            if self.status[p.0] == ProcessStatus::Failed {
                continue;
            }
            self.clock.compute[p.0] += f * self.cfg.flop_time_s;
            worst = worst.max(f);
        }
        let dt = worst * self.cfg.flop_time_s;
        self.advance(dt, 0);
        self.record(TraceKind::Compute { max_flops: worst });
        dt
    }

    /// The same amount of replicated work on every member.
    pub fn compute_uniform(&mut self, flops: f64) -> f64 {
        let v = vec![flops; self.size()];
        self.compute(&v)
    }

    /// Builds a message in the current epoch.
    pub fn message(&self, src: RankId, dst: RankId, bytes: usize) -> Message {
        Message {
            src: self.proc_of(src),
            dst: self.proc_of(dst),
            bytes,
            epoch: self.comm.epoch,
        }
    }

    /// Single point-to-point transfer. A self-message is a free local copy.
    pub fn p2p_transfer(&mut self, src: RankId, dst: RankId, bytes: usize) -> Result<f64> {
        let msg = self.message(src, dst, bytes);
        self.exchange(&[msg])
    }

    /// Delivers a batch of messages and returns the phase makespan.
    ///
    /// Each sender issues its messages one after another in posting order.
    /// Inter-node messages also hold the sending node's egress link and the
    /// receiving node's ingress link for their duration; intra-node messages
    /// only occupy the sender.
    pub fn exchange(&mut self, msgs: &[Message]) -> Result<f64> {
        for m in msgs {
            if m.epoch != self.comm.epoch {
                return Err(Error::StaleEpoch {
                    message: m.epoch,
                    current: self.comm.epoch,
                });
            }
        }
        let endpoints: BTreeSet<ProcId> = msgs.iter().flat_map(|m| [m.src, m.dst]).collect();
        self.check_alive(&endpoints)?;
        if msgs.is_empty() {
            self.advance(0.0, 0);
            return Ok(0.0);
        }

        let mut by_sender: BTreeMap<ProcId, VecDeque<usize>> = BTreeMap::new();
        for (i, m) in msgs.iter().enumerate() {
            by_sender.entry(m.src).or_default().push_back(i);
        }
        let n_nodes = self.nodes.num_nodes();
        let mut egress = vec![0.0f64; n_nodes];
        let mut ingress = vec![0.0f64; n_nodes];
        let mut seq = 0u64;
        let mut queue: BinaryHeap<Reverse<(Stamp, ProcId)>> = BinaryHeap::new();
        for &sender in by_sender.keys() {
            queue.push(Reverse((stamp(0.0, seq), sender)));
            seq += 1;
        }

        let t0 = self.clock.now;
        let mut makespan = 0.0f64;
        let mut total_bytes = 0u64;
        let mut deliveries = Vec::with_capacity(msgs.len());
        while let Some(Reverse((Stamp(bits, _), sender))) = queue.pop() {
            let ready = f64::from_bits(bits);
            let idx = by_sender
                .get_mut(&sender)
                .and_then(|q| q.pop_front())
                .expect("sender queued without pending messages");
            let m = msgs[idx];
            let (start, dur) = if m.src == m.dst {
                (ready, 0.0)
            } else if self.nodes.same_node(m.src, m.dst) {
                (ready, self.latency.transfer(true, m.bytes))
            } else {
                let (sn, dn) = (self.nodes.node_of(m.src), self.nodes.node_of(m.dst));
                let start = ready.max(egress[sn]).max(ingress[dn]);
                let dur = self.latency.transfer(false, m.bytes);
                egress[sn] = start + dur;
                ingress[dn] = start + dur;
                (start, dur)
            };
            let done = start + dur;
            if m.src != m.dst {
                self.clock.comm[m.src.0] += dur;
                self.clock.comm[m.dst.0] += dur;
                total_bytes += m.bytes as u64;
            }
            makespan = makespan.max(done);
            deliveries.push((done, m));
            if by_sender[&sender].is_empty() {
                continue;
            }
            queue.push(Reverse((stamp(done, seq), sender)));
            seq += 1;
        }
        for (done, m) in deliveries {
            self.trace.push(TraceEvent {
                time: t0 + done,
                kind: TraceKind::Deliver {
                    src: m.src,
                    dst: m.dst,
                    bytes: m.bytes,
                },
            });
        }
        self.advance(makespan, total_bytes);
        Ok(makespan)
    }

    fn spans_nodes(&self) -> bool {
        let mut nodes = self.comm.members.iter().map(|&p| self.nodes.node_of(p));
        match nodes.next() {
            Some(first) => nodes.any(|n| n != first),
            None => false,
        }
    }

    /// Cost of a collective over the current membership, without running it.
    pub fn collective_cost(&self, bytes: usize) -> f64 {
        self.latency.collective(self.size(), self.spans_nodes(), bytes)
    }

    /// Runs a collective over every member. Any failed member aborts it for all.
    pub fn collective(&mut self, kind: CollectiveKind, bytes: usize) -> Result<f64> {
        let members: BTreeSet<ProcId> = self.comm.members.iter().copied().collect();
        self.check_alive(&members)?;
        let cost = self.collective_cost(bytes);
        let rounds_bytes = if self.size() > 1 {
            bytes as u64 * self.size() as u64
        } else {
            0
        };
        self.advance(cost, rounds_bytes);
        self.record(TraceKind::Collective {
            kind,
            members: self.size(),
            bytes,
        });
        Ok(cost)
    }

    pub fn barrier(&mut self) -> Result<f64> {
        self.collective(CollectiveKind::Barrier, 0)
    }

    pub fn broadcast(&mut self, bytes: usize) -> Result<f64> {
        self.collective(CollectiveKind::Broadcast, bytes)
    }

    pub fn allgather(&mut self, bytes: usize) -> Result<f64> {
        self.collective(CollectiveKind::Allgather, bytes)
    }

    /// Sum reduction; the value is the rank-order sum, identical at every rank.
    pub fn allreduce_sum(&mut self, local: &[f64]) -> Result<f64> {
        assert_eq!(local.len(), self.size(), "one contribution per member");
        self.collective(CollectiveKind::Allreduce, 8)?;
        Ok(local.iter().sum())
    }

    /// Element-wise sum of equally sized vectors, one per member.
    pub fn allreduce_sum_vec(&mut self, local: &[Vec<f64>]) -> Result<Vec<f64>> {
        assert_eq!(local.len(), self.size(), "one contribution per member");
        let len = local.first().map_or(0, Vec::len);
        self.collective(CollectiveKind::Allreduce, 8 * len)?;
        let mut out = vec![0.0; len];
        for part in local {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        Ok(out)
    }

    pub fn allreduce_min_u64(&mut self, local: &[u64]) -> Result<u64> {
        assert_eq!(local.len(), self.size(), "one contribution per member");
        self.collective(CollectiveKind::Allreduce, 8)?;
        Ok(local.iter().copied().min().unwrap_or(0))
    }

    /// Installs the fault plan to be fired by [`World::poll_faults`].
    pub fn arm_faults(&mut self, plan: &FaultPlan, inner_iterations: usize) -> Result<()> {
        for inj in &plan.injections {
            if inj.rank >= self.cfg.processes {
                return Err(Error::Config(format!(
                    "fault plan targets rank {} which is not an active process",
                    inj.rank
                )));
            }
        }
        self.faults = plan.resolved(inner_iterations);
        Ok(())
    }

    pub fn pending_faults(&self) -> usize {
        self.faults.iter().filter(|f| !f.fired).count()
    }

    /// Kills every planned process whose trigger point has been reached.
    pub fn poll_faults(&mut self, outer_iteration: u64, inner: usize) -> Vec<ProcId> {
        let mut killed = Vec::new();
        for i in 0..self.faults.len() {
            if !self.faults[i].due(outer_iteration, inner) {
                continue;
            }
            self.faults[i].fired = true;
            let p = self.faults[i].proc;
            if self.status[p.0] == ProcessStatus::Active && self.kill(p).is_ok() {
                killed.push(p);
            }
        }
        killed
    }

    /// Marks a process failed. Its memory is the caller's to destroy.
    pub fn kill(&mut self, p: ProcId) -> Result<()> {
        let cur = self.status[p.0];
        if !cur.can_become(ProcessStatus::Failed) {
            return Err(Error::InvalidArgument(format!("{p} cannot fail from {cur:?}")));
        }
        self.status[p.0] = ProcessStatus::Failed;
        self.record(TraceKind::Kill(p));
        Ok(())
    }

    /// Agreement on the failed set after a `ProcFailed` was observed.
    ///
    /// `observed` lists what each observer saw; everyone else starts with an
    /// empty view. Costs one agreement round over the live members.
    pub fn detect_and_propagate(&mut self, observed: &BTreeMap<ProcId, BTreeSet<ProcId>>) -> Result<Agreement> {
        let members = self.comm.members.clone();
        let survivors: BTreeSet<ProcId> = members
            .iter()
            .copied()
            .filter(|p| self.status[p.0] != ProcessStatus::Failed)
            .collect();
        if survivors.is_empty() {
            return Err(Error::Unrecoverable("no surviving process to agree on failures".into()));
        }
        let order: Vec<(ProcId, ProcId)> = survivors
            .iter()
            .flat_map(|&a| survivors.iter().map(move |&b| (a, b)))
            .collect();
        let views = consensus_round(&members, &survivors, observed, &order);
        let failed = views.values().next().cloned().unwrap_or_default();
        let cost = self.latency.collective(
            survivors.len(),
            self.spans_nodes(),
            8 * members.len().div_ceil(64).max(1),
        );
        self.advance(cost, 0);
        self.record(TraceKind::Detected {
            failed: failed.iter().copied().collect(),
        });
        let agreement = Agreement { failed, views };
        debug_assert!(agreement.is_unanimous());
        Ok(agreement)
    }

    /// Removes failed members. Survivors keep their relative order.
    pub fn shrink_comm(&mut self) -> Result<CommEpoch> {
        let failed: BTreeSet<ProcId> = self
            .comm
            .members
            .iter()
            .copied()
            .filter(|p| self.status[p.0] == ProcessStatus::Failed)
            .collect();
        let next = self.comm.shrunk(&failed)?;
        let cost = self.latency.collective(next.size(), self.spans_nodes(), 0);
        self.advance(cost, 0);
        self.comm = next;
        self.record(TraceKind::Epoch {
            epoch: self.comm.epoch,
            size: self.comm.size(),
        });
        Ok(self.comm.clone())
    }

    /// Warm spares still waiting, lowest id first.
    pub fn idle_spares(&self) -> Vec<ProcId> {
        (0..self.status.len())
            .map(ProcId)
            .filter(|p| self.status[p.0] == ProcessStatus::Spare)
            .collect()
    }

    /// Replaces the membership. Spares in `next` become active; the epoch must
    /// advance and every member must be alive.
    pub fn install_comm(&mut self, next: CommEpoch) -> Result<()> {
        if next.epoch <= self.comm.epoch {
            return Err(Error::InvalidArgument(format!(
                "epoch must increase ({} -> {})",
                self.comm.epoch, next.epoch
            )));
        }
        let mut seen = BTreeSet::new();
        for &p in &next.members {
            if !seen.insert(p) {
                return Err(Error::InvalidArgument(format!("{p} listed twice")));
            }
            if self.status[p.0] == ProcessStatus::Failed {
                return Err(Error::InvalidArgument(format!("{p} has failed")));
            }
        }
        for &p in &next.members {
            if self.status[p.0] == ProcessStatus::Spare {
                self.status[p.0] = ProcessStatus::Active;
            }
        }
        self.comm = next;
        self.record(TraceKind::Epoch {
            epoch: self.comm.epoch,
            size: self.comm.size(),
        });
        Ok(())
    }

    /// Charges a modeled cost that is not tied to a concrete operation.
    pub fn charge(&mut self, dt: f64) {
        self.advance(dt, 0);
    }
}
