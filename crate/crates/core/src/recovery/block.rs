use std::ops::Range;

use crate::error::Result;

/// Per-rank state laid out along a contiguous run of global rows, which the
/// recovery executors can cut and glue without knowing its contents.
pub trait RowBlock: Sized + Clone {
    fn decode(bytes: &[u8]) -> Result<Self>;
    fn encode(&self) -> Vec<u8>;

    /// Global rows covered.
    fn rows(&self) -> Range<usize>;

    /// The part covering `rows`, which must lie inside [`RowBlock::rows`]
    /// unless empty.
    fn slice(&self, rows: Range<usize>) -> Self;

    /// Glues blocks covering adjacent row runs, given in row order.
    fn concat(parts: Vec<Self>) -> Result<Self>;

    /// Size of the state every rank holds identically.
    fn replicated_bytes(&self) -> usize {
        0
    }

    /// Overwrites the replicated part with `source`'s.
    fn adopt_replicated(&mut self, _source: &Self) {}
}
