use crate::error::{Error, Result};
use crate::simcore::{CommEpoch, ProcId, RankId, World};

use super::buddy::BuddyMap;
use super::store::{Snapshot, SnapshotKind, StoreTable};

/// Cost and volume of a checkpoint-related exchange.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TransferReport {
    pub cost: f64,
    pub bytes: u64,
    pub messages: usize,
}

impl TransferReport {
    pub fn add(&mut self, other: TransferReport) {
        self.cost += other.cost;
        self.bytes += other.bytes;
        self.messages += other.messages;
    }
}

fn discard_all(world: &World, stores: &mut StoreTable) {
    for &p in &world.comm().members {
        if let Ok(s) = stores.get_mut(p) {
            s.discard_staged();
        }
    }
}

/// Two-phase coordinated checkpoint of one snapshot kind.
///
/// Quiesce with a barrier, ship each rank's payload to its buddies (staged on
/// arrival), then commit everywhere. A failure in either step discards every
/// staged copy so the previous tag stays the consistent one.
pub fn coordinated_checkpoint(
    world: &mut World,
    stores: &mut StoreTable,
    redundancy: usize,
    kind: SnapshotKind,
    tag: u64,
    payloads: Vec<Vec<u8>>,
) -> Result<TransferReport> {
    let comm = world.comm().clone();
    assert_eq!(payloads.len(), comm.size(), "one payload per member");
    let map = BuddyMap::new(redundancy, comm.size())?;

    let mut msgs = Vec::new();
    let mut bytes = 0u64;
    for (rank, payload) in payloads.into_iter().enumerate() {
        let snap = Snapshot::new(rank, kind, tag, comm.epoch, payload);
        for b in map.buddies(rank) {
            msgs.push(world.message(RankId(rank), RankId(b), snap.payload_bytes()));
            bytes += snap.payload_bytes() as u64;
            if let Ok(s) = stores.get_mut(comm.members[b]) {
                s.stage(snap.clone());
            }
        }
        if let Ok(s) = stores.get_mut(comm.members[rank]) {
            s.stage(snap);
        }
    }

    let mut cost = match world.barrier() {
        Ok(c) => c,
        Err(e) => {
            discard_all(world, stores);
            return Err(e);
        }
    };
    match world.exchange(&msgs) {
        Ok(c) => cost += c,
        Err(e) => {
            discard_all(world, stores);
            return Err(e);
        }
    }
    for &p in &comm.members {
        stores.get_mut(p)?.commit_staged()?;
    }
    Ok(TransferReport {
        cost,
        bytes,
        messages: msgs.len(),
    })
}

pub fn checkpoint_dynamic(
    world: &mut World,
    stores: &mut StoreTable,
    redundancy: usize,
    payloads: Vec<Vec<u8>>,
    tag: u64,
) -> Result<TransferReport> {
    coordinated_checkpoint(world, stores, redundancy, SnapshotKind::Dynamic, tag, payloads)
}

pub fn checkpoint_static(
    world: &mut World,
    stores: &mut StoreTable,
    redundancy: usize,
    payloads: Vec<Vec<u8>>,
    tag: u64,
) -> Result<TransferReport> {
    coordinated_checkpoint(world, stores, redundancy, SnapshotKind::Static, tag, payloads)
}

/// Minimum over holders of each holder's newest tag. `None` means a holder
/// has nothing, which leaves no common tag.
pub fn min_of_maxima(maxima: &[Option<u64>]) -> Result<u64> {
    let mut out = u64::MAX;
    for m in maxima {
        match m {
            Some(t) => out = out.min(*t),
            None => {
                return Err(Error::Unrecoverable(
                    "no common checkpoint tag: a required dynamic snapshot is missing".into(),
                ))
            }
        }
    }
    if out == u64::MAX {
        return Err(Error::Unrecoverable("no dynamic snapshot to restore from".into()));
    }
    Ok(out)
}

/// Newest tag every survivor and every failed owner's surviving copy agree on.
///
/// `old` is the membership the snapshots were keyed in; `failed_owners` are
/// ranks of that membership. Survivors contribute their own newest tag, and a
/// failed owner contributes the newest tag among its surviving hosts. Agreed
/// with one min-allreduce over the current members.
pub fn latest_consistent_tag(
    world: &mut World,
    stores: &StoreTable,
    old: &CommEpoch,
    failed_owners: &[usize],
) -> Result<u64> {
    let mut maxima = Vec::new();
    for (rank, &p) in old.members.iter().enumerate() {
        if failed_owners.contains(&rank) {
            continue;
        }
        maxima.push(stores.get(p)?.max_dynamic_tag(rank));
    }
    for &f in failed_owners {
        let best = world
            .comm()
            .members
            .iter()
            .filter_map(|&p| stores.get(p).ok())
            .filter_map(|s| s.max_dynamic_tag(f))
            .max();
        if best.is_none() {
            return Err(Error::Unrecoverable(format!(
                "no surviving copy of rank {f}'s dynamic state (owner and all buddies failed)"
            )));
        }
        maxima.push(best);
    }
    let tag = min_of_maxima(&maxima)?;
    let n = world.size();
    world.allreduce_min_u64(&vec![tag; n])?;
    Ok(tag)
}

/// Pulls `owner`'s snapshot to `requester` from the nearest live holder.
///
/// A holder on the requester's node wins; otherwise the lowest current rank.
/// Reading one's own store is free.
pub fn fetch_backup(
    world: &mut World,
    stores: &StoreTable,
    requester: ProcId,
    owner: usize,
    kind: SnapshotKind,
) -> Result<(Snapshot, f64)> {
    if let Some(s) = stores.get(requester)?.get(owner, kind) {
        return Ok((s.clone(), 0.0));
    }
    let dst = world
        .rank_of(requester)
        .ok_or_else(|| Error::InvalidArgument(format!("{requester} is not a member")))?;
    let host = world
        .comm()
        .members
        .iter()
        .enumerate()
        .filter(|(_, &p)| stores.get(p).is_ok_and(|s| s.get(owner, kind).is_some()))
        .min_by_key(|(r, &p)| (!world.nodes().same_node(p, requester), *r))
        .map(|(r, &p)| (RankId(r), p));
    let Some((host_rank, host_proc)) = host else {
        return Err(Error::Unrecoverable(format!(
            "{kind:?} state of rank {owner} is lost: owner and all of its buddies failed"
        )));
    };
    let snap = stores.get(host_proc)?.get(owner, kind).unwrap().clone();
    let cost = world.p2p_transfer(host_rank, dst, snap.payload_bytes())?;
    Ok((snap, cost))
}

/// Re-establishes `min(r, P-1)` buddy copies of every member's latest
/// snapshots over the current membership. Only missing or outdated copies
/// are sent; stale copies of non-buddies are dropped.
pub fn refresh_backups(world: &mut World, stores: &mut StoreTable, redundancy: usize) -> Result<TransferReport> {
    let comm = world.comm().clone();
    let map = BuddyMap::new(redundancy, comm.size())?;
    let mut msgs = Vec::new();
    let mut deliveries = Vec::new();
    let mut bytes = 0u64;
    for (rank, &p) in comm.members.iter().enumerate() {
        for kind in [SnapshotKind::Static, SnapshotKind::Dynamic] {
            let Some(own) = stores.get(p)?.get(rank, kind).cloned() else {
                continue;
            };
            for b in map.buddies(rank) {
                let host = comm.members[b];
                let current = stores.get(host)?.get(rank, kind).is_some_and(|s| s.same_version(&own));
                if !current {
                    msgs.push(world.message(RankId(rank), RankId(b), own.payload_bytes()));
                    bytes += own.payload_bytes() as u64;
                    deliveries.push((host, own.clone()));
                }
            }
        }
    }
    let mut cost = 0.0;
    if !msgs.is_empty() {
        cost += world.barrier()?;
        cost += world.exchange(&msgs)?;
    }
    for (host, snap) in deliveries {
        let store = stores.get_mut(host)?;
        if let Some(prev) = store.get(snap.owner, snap.kind) {
            if prev.epoch == snap.epoch && prev.tag > snap.tag {
                return Err(Error::InvalidArgument(format!(
                    "host {host} holds a newer snapshot of rank {} than its owner",
                    snap.owner
                )));
            }
        }
        // The owner's copy is authoritative.
        store.remove(snap.owner, snap.kind);
        store.put(snap)?;
    }
    for (rank, &p) in comm.members.iter().enumerate() {
        let keep: Vec<usize> = std::iter::once(rank).chain(map.hosted_by(rank)).collect();
        stores.get_mut(p)?.retain_owners(|o| keep.contains(&o));
    }
    Ok(TransferReport {
        cost,
        bytes,
        messages: msgs.len(),
    })
}

/// Checks that each member's latest snapshots are held by exactly
/// `min(r, P-1)` other members.
pub fn verify_coverage(world: &World, stores: &StoreTable, redundancy: usize) -> Result<(), String> {
    let comm = world.comm();
    let map = BuddyMap::new(redundancy, comm.size()).map_err(|e| e.to_string())?;
    for (rank, &p) in comm.members.iter().enumerate() {
        let own_store = stores.get(p).map_err(|e| e.to_string())?;
        for kind in [SnapshotKind::Static, SnapshotKind::Dynamic] {
            let own = own_store
                .get(rank, kind)
                .ok_or_else(|| format!("rank {rank} has no local {kind:?} snapshot"))?;
            let holders = comm
                .members
                .iter()
                .filter(|&&q| q != p)
                .filter(|&&q| {
                    stores
                        .get(q)
                        .is_ok_and(|s| s.get(rank, kind).is_some_and(|h| h.same_version(own)))
                })
                .count();
            if holders != map.degree() {
                return Err(format!(
                    "rank {rank} {kind:?}: {holders} holders, expected {}",
                    map.degree()
                ));
            }
        }
    }
    Ok(())
}
