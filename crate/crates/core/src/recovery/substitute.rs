use crate::checkpoint::{fetch_backup, refresh_backups, SnapshotKind, StoreTable};
use crate::error::{Error, Result};
use crate::simcore::{CommEpoch, Phase, World};

use super::block::RowBlock;
use super::{PhaseMeter, RecoveryStrategy, Restored};

/// Puts one idle spare into each failed slot of `old`.
///
/// The world is expected to hold the shrunk epoch; the stitched epoch comes
/// after it and costs one collective over the new membership.
pub fn stitch_spare(world: &mut World, old: &CommEpoch, failed: &[usize]) -> Result<CommEpoch> {
    if failed.is_empty() {
        return Err(Error::InvalidArgument("no failed rank to replace".into()));
    }
    let spares = world.idle_spares();
    if spares.len() < failed.len() {
        return Err(Error::Unrecoverable(format!(
            "{} failed ranks but only {} spare processes left",
            failed.len(),
            spares.len()
        )));
    }
    let mut next = old.clone();
    next.epoch = world.comm().epoch + 1;
    next.failed.clear();
    for (&slot, spare) in failed.iter().zip(spares) {
        if slot >= next.size() {
            return Err(Error::InvalidArgument(format!("rank {slot} out of range")));
        }
        next.members[slot] = spare;
    }
    world.install_comm(next.clone())?;
    world.barrier()?;
    Ok(next)
}

/// Copies the replicated scalars of the lowest-ranked non-spare member into
/// every spare slot. Costs one broadcast.
pub fn sync_local_state<D: RowBlock>(world: &mut World, dynamics: &mut [D], spare_slots: &[usize]) -> Result<f64> {
    if spare_slots.is_empty() {
        return Ok(0.0);
    }
    let source = (0..dynamics.len())
        .find(|r| !spare_slots.contains(r))
        .ok_or_else(|| Error::Unrecoverable("no survivor to copy iteration state from".into()))?;
    let cost = world.broadcast(dynamics[source].replicated_bytes())?;
    let src = dynamics[source].clone();
    for &s in spare_slots {
        dynamics[s].adopt_replicated(&src);
    }
    Ok(cost)
}

/// Restores every rank of the stitched membership to `tag`.
///
/// Survivors read their own snapshots; each spare pulls the failed owner's
/// static and dynamic snapshots from a buddy, then replicated scalars are
/// synchronized and buddy copies refreshed. All of it is state recovery.
pub fn execute_substitute<S: RowBlock, D: RowBlock>(
    world: &mut World,
    stores: &mut StoreTable,
    failed: &[usize],
    tag: u64,
    redundancy: usize,
) -> Result<Restored<S, D>> {
    let meter = PhaseMeter::start(world);
    let prev = world.set_phase(Phase::Recovery);
    let result = restore::<S, D>(world, stores, failed, tag, redundancy);
    world.set_phase(prev);
    let (statics, dynamics, bytes) = result?;
    Ok(Restored {
        statics,
        dynamics,
        report: meter.report(world, RecoveryStrategy::Substitute, bytes, failed.to_vec()),
    })
}

fn restore<S: RowBlock, D: RowBlock>(
    world: &mut World,
    stores: &mut StoreTable,
    failed: &[usize],
    tag: u64,
    redundancy: usize,
) -> Result<(Vec<S>, Vec<D>, u64)> {
    let comm = world.comm().clone();
    let mut bytes = 0u64;
    for &slot in failed {
        let spare = comm.members[slot];
        for kind in [SnapshotKind::Static, SnapshotKind::Dynamic] {
            let (snap, cost) = fetch_backup(world, stores, spare, slot, kind)?;
            if cost > 0.0 {
                bytes += snap.payload_bytes() as u64;
            }
            let store = stores.get_mut(spare)?;
            store.remove(slot, kind);
            store.put(snap)?;
        }
    }

    let mut statics = Vec::with_capacity(comm.size());
    let mut dynamics = Vec::with_capacity(comm.size());
    for (rank, &p) in comm.members.iter().enumerate() {
        let store = stores.get(p)?;
        let stat = store.get(rank, SnapshotKind::Static);
        let dynamic = store.get(rank, SnapshotKind::Dynamic);
        let (Some(stat), Some(dynamic)) = (stat, dynamic) else {
            return Err(Error::Unrecoverable(format!("rank {rank} has no local snapshot")));
        };
        if dynamic.tag != tag {
            return Err(Error::Unrecoverable(format!(
                "rank {rank}'s dynamic snapshot has tag {}, expected {tag}",
                dynamic.tag
            )));
        }
        statics.push(S::decode(&stat.payload)?);
        dynamics.push(D::decode(&dynamic.payload)?);
    }
    sync_local_state(world, &mut dynamics, failed)?;
    bytes += refresh_backups(world, stores, redundancy)?.bytes;
    Ok((statics, dynamics, bytes))
}
