//! Buddy-based in-memory checkpointing.
//!
//! Every rank keeps its own latest snapshots and ships copies to the next
//! `r` ranks of the ring. Checkpoints are coordinated and two-phase: a copy
//! becomes visible only after every member received its buddies' payloads.

mod buddy;
pub mod codec;
mod policy;
mod protocol;
mod store;

pub use buddy::{buddy_set, BuddyMap};
pub use policy::{optimal_interval, Cadence, CheckpointPolicy};
pub use protocol::{
    checkpoint_dynamic, checkpoint_static, coordinated_checkpoint, fetch_backup, latest_consistent_tag, min_of_maxima,
    refresh_backups, verify_coverage, TransferReport,
};
pub use store::{BackupStore, DumpEntry, Snapshot, SnapshotKind, StoreDump, StoreTable};
