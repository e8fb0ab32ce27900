use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use crate::checkpoint::BuddyMap;
use crate::error::{Error, Result};

use super::distribution::BlockDistribution;

/// Where a run of rows comes from during shrink redistribution. Ranks are
/// ranks of the pre-failure membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    /// The surviving previous owner's local copy.
    LocalMemory { old_rank: usize },
    /// A buddy copy of `owner`'s snapshot held by `host`.
    Backup { owner: usize, host: usize },
}

impl RowSource {
    /// Old rank whose memory is read.
    pub fn holder(&self) -> usize {
        match *self {
            RowSource::LocalMemory { old_rank } => old_rank,
            RowSource::Backup { host, .. } => host,
        }
    }

    /// Old rank that owned the rows before the failure.
    pub fn owner(&self) -> usize {
        match *self {
            RowSource::LocalMemory { old_rank } => old_rank,
            RowSource::Backup { owner, .. } => owner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub rows: Range<usize>,
    pub source: RowSource,
    /// Rank in the shrunk membership.
    pub destination: usize,
}

/// Row movements needed to go from the old distribution to the canonical
/// one over the survivors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferPlan {
    pub old: BlockDistribution,
    pub new: BlockDistribution,
    /// Old rank of each new rank, in order.
    pub survivors: Vec<usize>,
    pub transfers: Vec<Transfer>,
}

impl TransferPlan {
    /// Transfers that cross process boundaries (the holder is not the
    /// destination itself).
    pub fn remote(&self) -> impl Iterator<Item = &Transfer> {
        self.transfers
            .iter()
            .filter(|t| t.source.holder() != self.survivors[t.destination])
    }

    pub fn for_destination(&self, new_rank: usize) -> impl Iterator<Item = &Transfer> {
        self.transfers.iter().filter(move |t| t.destination == new_rank)
    }

    /// Rows a new rank keeps from its own old block.
    pub fn kept(&self, new_rank: usize) -> Range<usize> {
        let own = self.old.range(self.survivors[new_rank]);
        let new = self.new.range(new_rank);
        let start = own.start.max(new.start);
        let end = own.end.min(new.end);
        if start < end {
            start..end
        } else {
            start..start
        }
    }
}

/// Which live old ranks hold a full (static and dynamic) copy of each owner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostingView {
    hosts: BTreeMap<usize, BTreeSet<usize>>,
}

impl HostingView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, owner: usize, host: usize) {
        if owner != host {
            self.hosts.entry(owner).or_default().insert(host);
        }
    }

    /// Ring-buddy hosting over `size` ranks with `failed` hosts removed.
    pub fn from_buddies(redundancy: usize, size: usize, failed: &BTreeSet<usize>) -> Result<Self> {
        let map = BuddyMap::new(redundancy, size)?;
        let mut view = Self::new();
        for owner in 0..size {
            for host in map.buddies(owner) {
                if !failed.contains(&host) {
                    view.add(owner, host);
                }
            }
        }
        Ok(view)
    }

    pub fn hosts(&self, owner: usize) -> impl Iterator<Item = usize> + '_ {
        self.hosts.get(&owner).into_iter().flatten().copied()
    }

    pub fn hosts_on(&self, owner: usize, host: usize) -> bool {
        self.hosts.get(&owner).is_some_and(|h| h.contains(&host))
    }
}

/// Plans the shrink redistribution.
///
/// Survivors keep their original order; the new distribution is canonical
/// over them. For each row run a destination needs, the source is, in order
/// of preference: a buddy copy already in the destination's own memory, the
/// surviving previous owner, or the lowest-ranked surviving buddy of a failed
/// owner.
pub fn plan_shrink_transfers(
    old: &BlockDistribution,
    failed: &BTreeSet<usize>,
    view: &HostingView,
) -> Result<TransferPlan> {
    if let Some(&bad) = failed.iter().find(|&&f| f >= old.ranks()) {
        return Err(Error::InvalidArgument(format!("failed rank {bad} out of range")));
    }
    let survivors: Vec<usize> = (0..old.ranks()).filter(|r| !failed.contains(r)).collect();
    if survivors.is_empty() {
        return Err(Error::Unrecoverable("no surviving ranks to shrink onto".into()));
    }
    let new = BlockDistribution::canonical(old.rows(), survivors.len())?;

    let mut transfers = Vec::new();
    let mut lost = Vec::new();
    for (dest, &me) in survivors.iter().enumerate() {
        let target = new.range(dest);
        let own = old.range(me);
        let below = target.start..target.end.min(own.start).max(target.start);
        let above = target.start.max(own.end).min(target.end)..target.end;
        for needed in [below, above] {
            for (owner, rows) in old.split_by_owner(needed) {
                let source = if view.hosts_on(owner, me) {
                    RowSource::Backup { owner, host: me }
                } else if !failed.contains(&owner) {
                    RowSource::LocalMemory { old_rank: owner }
                } else if let Some(host) = view.hosts(owner).next() {
                    RowSource::Backup { owner, host }
                } else {
                    lost.push((owner, rows));
                    continue;
                };
                transfers.push(Transfer {
                    rows,
                    source,
                    destination: dest,
                });
            }
        }
    }
    if !lost.is_empty() {
        let detail: Vec<String> = lost
            .iter()
            .map(|(o, r)| format!("rows {}..{} of rank {o}", r.start, r.end))
            .collect();
        return Err(Error::Unrecoverable(format!(
            "owner and all buddies failed; lost {}",
            detail.join(", ")
        )));
    }
    Ok(TransferPlan {
        old: old.clone(),
        new,
        survivors,
        transfers,
    })
}
