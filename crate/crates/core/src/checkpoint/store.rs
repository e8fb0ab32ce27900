use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simcore::ProcId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SnapshotKind {
    /// Matrix rows and right-hand side.
    Static,
    /// Solver state.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    /// Rank of the owner in epoch `epoch`.
    pub owner: usize,
    pub kind: SnapshotKind,
    pub tag: u64,
    pub epoch: u64,
    pub payload: Arc<[u8]>,
}

impl Snapshot {
    pub fn new(owner: usize, kind: SnapshotKind, tag: u64, epoch: u64, payload: Vec<u8>) -> Self {
        Self {
            owner,
            kind,
            tag,
            epoch,
            payload: payload.into(),
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload.len()
    }

    /// Same owner, kind, tag and epoch.
    pub fn same_version(&self, other: &Snapshot) -> bool {
        self.owner == other.owner && self.kind == other.kind && self.tag == other.tag && self.epoch == other.epoch
    }
}

/// Snapshots held in one process's memory: its own plus those of the ranks
/// it is a buddy for.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackupStore {
    committed: BTreeMap<(usize, SnapshotKind), Snapshot>,
    staged: BTreeMap<(usize, SnapshotKind), Snapshot>,
}

impl BackupStore {
    pub fn get(&self, owner: usize, kind: SnapshotKind) -> Option<&Snapshot> {
        self.committed.get(&(owner, kind))
    }

    pub fn max_dynamic_tag(&self, owner: usize) -> Option<u64> {
        self.get(owner, SnapshotKind::Dynamic).map(|s| s.tag)
    }

    /// Stores a committed snapshot, enforcing strictly increasing dynamic tags
    /// within one epoch.
    pub fn put(&mut self, snap: Snapshot) -> Result<()> {
        if snap.kind == SnapshotKind::Dynamic {
            if let Some(prev) = self.get(snap.owner, snap.kind) {
                if prev.epoch == snap.epoch && prev.tag >= snap.tag {
                    return Err(Error::InvalidArgument(format!(
                        "dynamic tag for owner {} must increase ({} -> {})",
                        snap.owner, prev.tag, snap.tag
                    )));
                }
            }
        }
        self.committed.insert((snap.owner, snap.kind), snap);
        Ok(())
    }

    pub fn remove(&mut self, owner: usize, kind: SnapshotKind) -> Option<Snapshot> {
        self.committed.remove(&(owner, kind))
    }

    pub fn stage(&mut self, snap: Snapshot) {
        self.staged.insert((snap.owner, snap.kind), snap);
    }

    pub fn commit_staged(&mut self) -> Result<()> {
        for (_, snap) in std::mem::take(&mut self.staged) {
            self.put(snap)?;
        }
        Ok(())
    }

    pub fn discard_staged(&mut self) {
        self.staged.clear();
    }

    pub fn has_staged(&self) -> bool {
        !self.staged.is_empty()
    }

    pub fn retain_owners(&mut self, keep: impl Fn(usize) -> bool) {
        self.committed.retain(|(owner, _), _| keep(*owner));
    }

    pub fn clear(&mut self) {
        self.committed.clear();
        self.staged.clear();
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.committed.values()
    }

    pub fn bytes(&self) -> usize {
        self.committed.values().map(Snapshot::payload_bytes).sum()
    }
}

/// Per-process memories, indexed by [`ProcId`]. A failed process's store is
/// destroyed and any later read is an error.
#[derive(Debug, Clone)]
pub struct StoreTable {
    stores: Vec<Option<BackupStore>>,
}

impl StoreTable {
    pub fn new(procs: usize) -> Self {
        Self {
            stores: vec![Some(BackupStore::default()); procs],
        }
    }

    pub fn get(&self, p: ProcId) -> Result<&BackupStore> {
        self.stores[p.0].as_ref().ok_or(Error::FailedMemoryRead(p))
    }

    pub fn get_mut(&mut self, p: ProcId) -> Result<&mut BackupStore> {
        self.stores[p.0].as_mut().ok_or(Error::FailedMemoryRead(p))
    }

    pub fn is_alive(&self, p: ProcId) -> bool {
        self.stores[p.0].is_some()
    }

    pub fn destroy(&mut self, p: ProcId) {
        self.stores[p.0] = None;
    }

    pub fn dump(&self) -> Vec<StoreDump> {
        self.stores
            .iter()
            .enumerate()
            .map(|(p, s)| StoreDump {
                proc: p,
                alive: s.is_some(),
                entries: s
                    .iter()
                    .flat_map(|s| s.snapshots())
                    .map(|snap| DumpEntry {
                        owner: snap.owner,
                        kind: snap.kind,
                        tag: snap.tag,
                        epoch: snap.epoch,
                        bytes: snap.payload_bytes(),
                    })
                    .collect(),
            })
            .collect()
    }
}

/// JSON view of one process's store for debugging.
#[derive(Debug, Clone, Serialize)]
pub struct StoreDump {
    pub proc: usize,
    pub alive: bool,
    pub entries: Vec<DumpEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DumpEntry {
    pub owner: usize,
    pub kind: SnapshotKind,
    pub tag: u64,
    pub epoch: u64,
    pub bytes: usize,
}
