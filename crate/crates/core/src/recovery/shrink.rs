use crate::checkpoint::{refresh_backups, Snapshot, SnapshotKind, StoreTable};
use crate::error::{Error, Result};
use crate::simcore::{CommEpoch, Phase, ProcId, RankId, World};

use super::block::RowBlock;
use super::plan::TransferPlan;
use super::{PhaseMeter, RecoveryStrategy, Restored};

fn read<B: RowBlock>(
    stores: &StoreTable,
    holder: ProcId,
    owner: usize,
    kind: SnapshotKind,
    tag: u64,
) -> Result<(B, u64)> {
    let snap = stores
        .get(holder)?
        .get(owner, kind)
        .ok_or_else(|| Error::Unrecoverable(format!("{holder} holds no {kind:?} snapshot of rank {owner}")))?;
    if kind == SnapshotKind::Dynamic && snap.tag != tag {
        return Err(Error::Unrecoverable(format!(
            "{holder} holds rank {owner}'s dynamic snapshot at tag {}, expected {tag}",
            snap.tag
        )));
    }
    Ok((B::decode(&snap.payload)?, snap.tag))
}

/// Redistributes static and dynamic state over the shrunk membership.
///
/// `old` is the membership the snapshots are keyed in and the world must
/// already hold the shrunk epoch. Remote row runs travel in one exchange;
/// afterwards every survivor's store is rebuilt for the new epoch and buddy
/// copies are refreshed. Transfers and refresh are charged as state recovery.
pub fn execute_shrink<S: RowBlock, D: RowBlock>(
    world: &mut World,
    stores: &mut StoreTable,
    old: &CommEpoch,
    plan: &TransferPlan,
    tag: u64,
    redundancy: usize,
) -> Result<Restored<S, D>> {
    let comm = world.comm().clone();
    if comm.size() != plan.survivors.len()
        || plan
            .survivors
            .iter()
            .enumerate()
            .any(|(new, &o)| comm.members[new] != old.members[o])
    {
        return Err(Error::InvalidArgument(
            "transfer plan does not match the installed membership".into(),
        ));
    }
    let meter = PhaseMeter::start(world);
    let prev = world.set_phase(Phase::Recovery);
    let result = redistribute(world, stores, old, plan, tag, redundancy);
    world.set_phase(prev);
    let (statics, dynamics, bytes) = result?;
    let failed = (0..old.size()).filter(|r| !plan.survivors.contains(r)).collect();
    Ok(Restored {
        statics,
        dynamics,
        report: meter.report(world, RecoveryStrategy::Shrink, bytes, failed),
    })
}

type Parts<S, D> = (Vec<S>, Vec<D>, u64);

fn redistribute<S: RowBlock, D: RowBlock>(
    world: &mut World,
    stores: &mut StoreTable,
    old: &CommEpoch,
    plan: &TransferPlan,
    tag: u64,
    redundancy: usize,
) -> Result<Parts<S, D>> {
    let comm = world.comm().clone();
    let mut static_parts: Vec<Vec<S>> = vec![Vec::new(); comm.size()];
    let mut dynamic_parts: Vec<Vec<D>> = vec![Vec::new(); comm.size()];
    let mut static_tags = vec![0u64; comm.size()];
    let mut msgs = Vec::new();
    let mut bytes = 0u64;

    for (dest, &me) in plan.survivors.iter().enumerate() {
        let p = comm.members[dest];
        let kept = plan.kept(dest);
        let (s, stag): (S, u64) = read(stores, p, me, SnapshotKind::Static, tag)?;
        let (d, _): (D, u64) = read(stores, p, me, SnapshotKind::Dynamic, tag)?;
        static_parts[dest].push(s.slice(kept.clone()));
        dynamic_parts[dest].push(d.slice(kept));
        static_tags[dest] = stag;
    }
    for t in &plan.transfers {
        let holder = old.members[t.source.holder()];
        let owner = t.source.owner();
        let (s, _): (S, u64) = read(stores, holder, owner, SnapshotKind::Static, tag)?;
        let (d, _): (D, u64) = read(stores, holder, owner, SnapshotKind::Dynamic, tag)?;
        let s = s.slice(t.rows.clone());
        let d = d.slice(t.rows.clone());
        if holder != comm.members[t.destination] {
            let len = s.encode().len() + d.encode().len();
            let src = world
                .rank_of(holder)
                .ok_or_else(|| Error::InvalidArgument(format!("{holder} is not a member of the shrunk epoch")))?;
            msgs.push(world.message(src, RankId(t.destination), len));
            bytes += len as u64;
        }
        static_parts[t.destination].push(s);
        dynamic_parts[t.destination].push(d);
    }
    world.exchange(&msgs)?;

    let mut statics = Vec::with_capacity(comm.size());
    let mut dynamics = Vec::with_capacity(comm.size());
    for (dest, (mut sp, mut dp)) in static_parts.into_iter().zip(dynamic_parts).enumerate() {
        sp.sort_by_key(|b| b.rows().start);
        dp.sort_by_key(|b| b.rows().start);
        let s = S::concat(sp)?;
        let d = D::concat(dp)?;
        let want = plan.new.range(dest);
        if s.rows() != want || d.rows() != want {
            return Err(Error::InvalidArgument(format!(
                "rank {dest} assembled rows {:?}, expected {want:?}",
                s.rows()
            )));
        }
        statics.push(s);
        dynamics.push(d);
    }

    for (rank, &p) in comm.members.iter().enumerate() {
        let store = stores.get_mut(p)?;
        store.clear();
        store.put(Snapshot::new(
            rank,
            SnapshotKind::Static,
            static_tags[rank],
            comm.epoch,
            statics[rank].encode(),
        ))?;
        store.put(Snapshot::new(
            rank,
            SnapshotKind::Dynamic,
            tag,
            comm.epoch,
            dynamics[rank].encode(),
        ))?;
    }
    bytes += refresh_backups(world, stores, redundancy)?.bytes;
    Ok((statics, dynamics, bytes))
}
