use std::collections::BTreeSet;
use std::ops::Range;

use proptest::prelude::*;

use super::*;
use crate::checkpoint::codec::{Decoder, Encoder};
use crate::checkpoint::{checkpoint_dynamic, checkpoint_static, verify_coverage, SnapshotKind, StoreTable};
use crate::error::Result;
use crate::simcore::{ProcId, World, WorldConfig};

/// Rows carry their global index scaled by `salt`; `step` stands in for
/// replicated iteration state.
#[derive(Debug, Clone, PartialEq)]
struct Rows {
    start: usize,
    vals: Vec<f64>,
    step: u64,
}

impl Rows {
    fn full(range: Range<usize>, salt: f64, step: u64) -> Self {
        Rows {
            start: range.start,
            vals: range.map(|i| i as f64 * salt).collect(),
            step,
        }
    }
}

impl RowBlock for Rows {
    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes)?;
        let start = d.u64()? as usize;
        let vals = d.f64s()?;
        let step = d.u64()?;
        d.finish()?;
        Ok(Rows { start, vals, step })
    }

    fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.u64(self.start as u64).f64s(&self.vals).u64(self.step);
        e.finish()
    }

    fn rows(&self) -> Range<usize> {
        self.start..self.start + self.vals.len()
    }

    fn slice(&self, rows: Range<usize>) -> Self {
        if rows.is_empty() {
            return Rows {
                start: rows.start,
                vals: Vec::new(),
                step: self.step,
            };
        }
        Rows {
            start: rows.start,
            vals: self.vals[rows.start - self.start..rows.end - self.start].to_vec(),
            step: self.step,
        }
    }

    fn concat(parts: Vec<Self>) -> Result<Self> {
        let mut parts = parts.into_iter().filter(|p| !p.vals.is_empty()).peekable();
        let Some(first) = parts.next() else {
            return Ok(Rows {
                start: 0,
                vals: Vec::new(),
                step: 0,
            });
        };
        let mut out = first;
        for p in parts {
            assert_eq!(p.start, out.start + out.vals.len());
            out.vals.extend(p.vals);
        }
        Ok(out)
    }

    fn replicated_bytes(&self) -> usize {
        8
    }

    fn adopt_replicated(&mut self, source: &Self) {
        self.step = source.step;
    }
}

const STATIC_SALT: f64 = 1.0;
const DYNAMIC_SALT: f64 = 0.5;

/// World with static and dynamic checkpoints of a synthetic row vector.
fn setup(
    rows: usize,
    p: usize,
    spares: usize,
    cpn: usize,
    r: usize,
    tag: u64,
) -> (World, StoreTable, BlockDistribution) {
    let mut w = World::new(&WorldConfig::new(p, spares, cpn)).unwrap();
    let mut st = StoreTable::new(p + spares);
    let dist = BlockDistribution::canonical(rows, p).unwrap();
    let statics = (0..p)
        .map(|k| Rows::full(dist.range(k), STATIC_SALT, 0).encode())
        .collect();
    let dynamics = (0..p)
        .map(|k| Rows::full(dist.range(k), DYNAMIC_SALT, tag).encode())
        .collect();
    checkpoint_static(&mut w, &mut st, r, statics, 0).unwrap();
    checkpoint_dynamic(&mut w, &mut st, r, dynamics, tag).unwrap();
    (w, st, dist)
}

fn fail(w: &mut World, st: &mut StoreTable, ranks: &[usize]) {
    for &f in ranks {
        let p = w.comm().members[f];
        w.kill(p).unwrap();
        st.destroy(p);
    }
}

fn gathered(blocks: &[Rows]) -> Vec<f64> {
    blocks.iter().flat_map(|b| b.vals.iter().copied()).collect()
}

fn oracle(rows: usize, salt: f64) -> Vec<f64> {
    (0..rows).map(|i| i as f64 * salt).collect()
}

fn shrink(
    w: &mut World,
    st: &mut StoreTable,
    dist: &BlockDistribution,
    failed: &[usize],
    r: usize,
    tag: u64,
) -> Result<Restored<Rows, Rows>> {
    let old = w.comm().clone();
    let failed_set: BTreeSet<usize> = failed.iter().copied().collect();
    let view = HostingView::from_buddies(r, old.size(), &failed_set)?;
    let plan = plan_shrink_transfers(dist, &failed_set, &view)?;
    w.shrink_comm()?;
    execute_shrink(w, st, &old, &plan, tag, r)
}

#[test]
fn shrink_reslices_the_checkpoint() {
    let (mut w, mut st, dist) = setup(12, 6, 0, 2, 1, 3);
    fail(&mut w, &mut st, &[4]);
    let out = shrink(&mut w, &mut st, &dist, &[4], 1, 3).unwrap();
    assert_eq!(out.statics.len(), 5);
    let sizes: Vec<usize> = out.statics.iter().map(|b| b.vals.len()).collect();
    assert_eq!(sizes, vec![3, 3, 2, 2, 2]);
    assert_eq!(gathered(&out.statics), oracle(12, STATIC_SALT));
    assert_eq!(gathered(&out.dynamics), oracle(12, DYNAMIC_SALT));
    assert!(out.dynamics.iter().all(|d| d.step == 3));
    assert!(out.report.t_pfx > 0.0 && out.report.bytes_moved > 0);
    assert_eq!(out.report.failed, vec![4]);
    verify_coverage(&w, &st, 1).unwrap();
    let epoch = w.comm().epoch;
    for (rank, &p) in w.comm().members.iter().enumerate() {
        let s = st.get(p).unwrap().get(rank, SnapshotKind::Dynamic).unwrap();
        assert_eq!((s.tag, s.epoch), (3, epoch));
    }
}

#[test]
fn shrink_to_one_rank() {
    let (mut w, mut st, dist) = setup(10, 2, 0, 2, 1, 1);
    fail(&mut w, &mut st, &[0]);
    let out = shrink(&mut w, &mut st, &dist, &[0], 1, 1).unwrap();
    assert_eq!(out.statics.len(), 1);
    assert_eq!(out.statics[0].rows(), 0..10);
    assert_eq!(gathered(&out.dynamics), oracle(10, DYNAMIC_SALT));
}

#[test]
fn sequential_shrinks_grow_the_workload() {
    let (mut w, mut st, dist) = setup(48, 8, 0, 2, 1, 1);
    fail(&mut w, &mut st, &[7]);
    let first = shrink(&mut w, &mut st, &dist, &[7], 1, 1).unwrap();
    let d1 = BlockDistribution::canonical(48, 7).unwrap();
    fail(&mut w, &mut st, &[6]);
    let second = shrink(&mut w, &mut st, &d1, &[6], 1, 1).unwrap();
    let max = |b: &[Rows]| b.iter().map(|x| x.vals.len()).max().unwrap();
    assert!(max(&second.statics) > max(&first.statics));
    assert!(max(&first.statics) > dist.len_of(0));
    assert_eq!(gathered(&second.statics), oracle(48, STATIC_SALT));
}

#[test]
fn shrink_after_rank_and_buddies_lost_is_fatal() {
    let (mut w, mut st, dist) = setup(12, 6, 0, 2, 2, 1);
    fail(&mut w, &mut st, &[1, 2, 3]);
    let err = shrink(&mut w, &mut st, &dist, &[1, 2, 3], 2, 1).unwrap_err();
    assert!(err.is_unrecoverable(), "{err}");
}

#[test]
fn stitch_fills_the_failed_slot() {
    let (mut w, mut st, _) = setup(12, 6, 1, 2, 1, 1);
    let old = w.comm().clone();
    fail(&mut w, &mut st, &[4]);
    w.shrink_comm().unwrap();
    let next = stitch_spare(&mut w, &old, &[4]).unwrap();
    let ids: Vec<usize> = next.members.iter().map(|p| p.0).collect();
    assert_eq!(ids, vec![0, 1, 2, 3, 6, 5]);
    assert_eq!(next.epoch, 2);
    assert_eq!(w.comm(), &next);
}

#[test]
fn stitch_misuse_and_exhaustion() {
    let (mut w, mut st, _) = setup(12, 4, 2, 2, 1, 1);
    let old = w.comm().clone();
    assert!(stitch_spare(&mut w, &old, &[]).is_err());
    fail(&mut w, &mut st, &[0, 3]);
    w.shrink_comm().unwrap();
    let next = stitch_spare(&mut w, &old, &[0, 3]).unwrap();
    assert_eq!(next.size(), 4);
    let old = next.clone();
    fail(&mut w, &mut st, &[1]);
    w.shrink_comm().unwrap();
    assert!(stitch_spare(&mut w, &old, &[1]).unwrap_err().is_unrecoverable());
}

#[test]
fn substitute_restores_the_failed_rows() {
    let (mut w, mut st, dist) = setup(12, 6, 1, 2, 1, 5);
    let before: Vec<usize> = (0..6)
        .map(|r| {
            st.get(ProcId(r))
                .unwrap()
                .get(r, SnapshotKind::Dynamic)
                .unwrap()
                .payload_bytes()
        })
        .collect();
    let old = w.comm().clone();
    fail(&mut w, &mut st, &[4]);
    w.shrink_comm().unwrap();
    stitch_spare(&mut w, &old, &[4]).unwrap();
    let out: Restored<Rows, Rows> = execute_substitute(&mut w, &mut st, &[4], 5, 1).unwrap();
    assert_eq!(out.statics[4], Rows::full(dist.range(4), STATIC_SALT, 0));
    assert_eq!(out.dynamics[4], Rows::full(dist.range(4), DYNAMIC_SALT, 5));
    for (k, b) in out.statics.iter().enumerate() {
        assert_eq!(b.rows(), dist.range(k));
    }
    verify_coverage(&w, &st, 1).unwrap();
    let after: Vec<usize> = (0..6)
        .map(|r| {
            let p = w.comm().members[r];
            st.get(p)
                .unwrap()
                .get(r, SnapshotKind::Dynamic)
                .unwrap()
                .payload_bytes()
        })
        .collect();
    assert_eq!(before, after);
    // Only the spare's two fetched snapshots and rank 3's refreshed copies
    // move; survivors restore from local memory.
    let own: u64 = [SnapshotKind::Static, SnapshotKind::Dynamic]
        .iter()
        .map(|&k| st.get(ProcId(6)).unwrap().get(4, k).unwrap().payload_bytes() as u64)
        .sum();
    let from3: u64 = [SnapshotKind::Static, SnapshotKind::Dynamic]
        .iter()
        .map(|&k| st.get(ProcId(3)).unwrap().get(3, k).unwrap().payload_bytes() as u64)
        .sum();
    assert_eq!(out.report.bytes_moved, own + from3);
}

#[test]
fn substitute_without_failures_is_free() {
    let (mut w, mut st, _) = setup(12, 4, 1, 2, 1, 2);
    let t = w.now();
    let out: Restored<Rows, Rows> = execute_substitute(&mut w, &mut st, &[], 2, 1).unwrap();
    assert_eq!(out.report, RecoveryReport::zero(RecoveryStrategy::Substitute));
    assert_eq!(w.now(), t);
}

#[test]
fn sync_copies_replicated_state() {
    let mut w = World::new(&WorldConfig::new(3, 0, 3)).unwrap();
    let mut d = vec![
        Rows::full(0..1, 1.0, 9),
        Rows::full(1..2, 1.0, 0),
        Rows::full(2..3, 1.0, 9),
    ];
    let cost = sync_local_state(&mut w, &mut d, &[1]).unwrap();
    assert!(cost > 0.0);
    assert!(d.iter().all(|b| b.step == 9));
    assert_eq!(d[1].vals, vec![1.0]);
}

#[test]
fn strategy_names_round_trip() {
    for s in [RecoveryStrategy::Shrink, RecoveryStrategy::Substitute] {
        assert_eq!(s.as_str().parse::<RecoveryStrategy>().unwrap(), s);
    }
    assert!("respawn".parse::<RecoveryStrategy>().is_err());
}

// Brute-force set arithmetic: every destination must receive exactly the
// rows of its new range it did not already own, each exactly once, from a
// holder that actually has them.
fn check_plan(rows: usize, p: usize, failed: &BTreeSet<usize>, r: usize) -> std::result::Result<(), String> {
    let old = BlockDistribution::canonical(rows, p).unwrap();
    let view = HostingView::from_buddies(r, p, failed).unwrap();
    let plan = plan_shrink_transfers(&old, failed, &view).map_err(|e| e.to_string())?;
    let survivors: Vec<usize> = (0..p).filter(|x| !failed.contains(x)).collect();
    let per = rows / survivors.len();
    let extra = rows % survivors.len();
    let mut start = 0;
    for (d, &me) in survivors.iter().enumerate() {
        let len = per + usize::from(d < extra);
        let target: BTreeSet<usize> = (start..start + len).collect();
        start += len;
        let owned: BTreeSet<usize> = old.range(me).collect();
        let need: BTreeSet<usize> = target.difference(&owned).copied().collect();
        let mut got = BTreeSet::new();
        for t in plan.transfers.iter().filter(|t| t.destination == d) {
            for row in t.rows.clone() {
                if !got.insert(row) {
                    return Err(format!("row {row} delivered twice to {d}"));
                }
            }
            let owner = t.source.owner();
            if !old.range(owner).contains(&t.rows.start) || old.range(owner).end < t.rows.end {
                return Err(format!("transfer {t:?} outside owner's rows"));
            }
            let holder = t.source.holder();
            if failed.contains(&holder) {
                return Err(format!("transfer {t:?} reads failed memory"));
            }
            if holder != owner && !crate::checkpoint::buddy_set(owner, r, p).contains(&holder) {
                return Err(format!("{holder} holds no copy of {owner}"));
            }
        }
        if got != need {
            return Err(format!("destination {d}: got {got:?}, need {need:?}"));
        }
    }
    if start != rows {
        return Err("oracle distribution incomplete".into());
    }
    // Single-failure locality: ranks above the failed one only read their
    // own memory.
    if failed.len() == 1 {
        let f = *failed.iter().next().unwrap();
        for t in plan.remote() {
            if plan.survivors[t.destination] > f {
                return Err(format!("old rank {} receives {t:?}", plan.survivors[t.destination]));
            }
        }
    }
    Ok(())
}

#[test]
fn plans_match_set_oracle_for_small_instances() {
    for p in 2..=8 {
        for rows in 0..=64 {
            for f in 0..p {
                check_plan(rows, p, &BTreeSet::from([f]), 1).unwrap();
            }
            for a in 0..p {
                for b in a + 1..p {
                    if p > 2 {
                        check_plan(rows, p, &BTreeSet::from([a, b]), 2).unwrap();
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn plans_are_exact_for_random_failures(
        p in 2usize..24,
        rows in 0usize..400,
        r in 1usize..4,
        seed in any::<u64>(),
    ) {
        let k = (seed as usize % r.min(p - 1)) + 1;
        let mut failed = BTreeSet::new();
        let mut x = seed;
        while failed.len() < k {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            failed.insert((x >> 33) as usize % p);
        }
        // fewer than r+1 failures never lose a whole buddy group
        prop_assert_eq!(check_plan(rows, p, &failed, r), Ok(()));
    }
}
