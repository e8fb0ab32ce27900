use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Ring-successor buddy assignment over the current epoch's ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuddyMap {
    redundancy: usize,
    size: usize,
}

impl BuddyMap {
    pub fn new(redundancy: usize, size: usize) -> Result<Self> {
        if redundancy == 0 {
            return Err(Error::Config("redundancy must be at least 1".into()));
        }
        if size == 0 {
            return Err(Error::InvalidArgument("buddy map over an empty communicator".into()));
        }
        Ok(Self { redundancy, size })
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of buddies each rank actually gets.
    pub fn degree(&self) -> usize {
        self.redundancy.min(self.size - 1)
    }

    /// Ranks that hold copies of `rank`'s snapshots, nearest successor first.
    pub fn buddies(&self, rank: usize) -> Vec<usize> {
        (1..=self.degree()).map(|k| (rank + k) % self.size).collect()
    }

    /// Ranks whose snapshots `host` keeps.
    pub fn hosted_by(&self, host: usize) -> Vec<usize> {
        (1..=self.degree())
            .map(|k| (host + self.size - k) % self.size)
            .collect()
    }
}

/// `{(rank+1) mod P, ..., (rank+r) mod P}`, never including `rank` itself.
pub fn buddy_set(rank: usize, redundancy: usize, size: usize) -> BTreeSet<usize> {
    BuddyMap::new(redundancy.max(1), size.max(1))
        .map(|m| m.buddies(rank).into_iter().collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(buddy_set(3, 1, 6), BTreeSet::from([4]));
        assert_eq!(buddy_set(5, 2, 6), BTreeSet::from([0, 1]));
        assert!(buddy_set(0, 1, 1).is_empty());
    }

    #[test]
    fn zero_redundancy_is_a_config_error() {
        assert!(BuddyMap::new(0, 4).is_err());
    }

    proptest! {
        #[test]
        fn ring_properties(size in 1usize..20, r in 1usize..6, rank_seed in 0usize..1000) {
            let map = BuddyMap::new(r, size).unwrap();
            let rank = rank_seed % size;
            let b = map.buddies(rank);
            prop_assert_eq!(b.len(), r.min(size - 1));
            prop_assert!(!b.contains(&rank));
            let uniq: BTreeSet<_> = b.iter().copied().collect();
            prop_assert_eq!(uniq.len(), b.len());
            for host in b {
                prop_assert!(map.hosted_by(host).contains(&rank));
            }
        }
    }
}
