use std::collections::BTreeSet;

use thiserror::Error;

use crate::simcore::ProcId;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    /// A communication operation touched a failed process. Raised to every
    /// participant listed in `observers` after the detection timeout.
    #[error("process failure detected: failed={failed:?}")]
    ProcFailed {
        failed: BTreeSet<ProcId>,
        observers: BTreeSet<ProcId>,
    },

    /// A message stamped with an old communicator epoch reached the new one.
    #[error("message from epoch {message} rejected in epoch {current}")]
    StaleEpoch { message: u64, current: u64 },

    /// State needed to continue is gone (owner and every buddy failed,
    /// no spare left, no common checkpoint tag, ...).
    #[error("unrecoverable: {0}")]
    Unrecoverable(String),

    /// Attempted to read the memory of a process that has failed.
    #[error("read of memory owned by failed process {0}")]
    FailedMemoryRead(ProcId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt snapshot payload: {0}")]
    Codec(String),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_proc_failed(&self) -> bool {
        matches!(self, Error::ProcFailed { .. })
    }

    pub fn is_unrecoverable(&self) -> bool {
        matches!(self, Error::Unrecoverable(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
