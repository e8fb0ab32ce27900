use std::ops::Range;

use crate::checkpoint::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::recovery::{BlockDistribution, RowBlock};
use crate::simcore::{Message, RankId, World};

/// Square sparse matrix in compressed-row form with global column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || row_ptr[n] != cols.len() {
            return Err(Error::InvalidArgument("malformed row pointer array".into()));
        }
        if cols.len() != vals.len() {
            return Err(Error::InvalidArgument(
                "column and value arrays differ in length".into(),
            ));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("row pointers must be non-decreasing".into()));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= n) {
            return Err(Error::InvalidArgument(format!("column {c} out of range for {n} rows")));
        }
        Ok(Self { n, row_ptr, cols, vals })
    }

    /// Builds from `(row, col, value)` entries; duplicates are summed and
    /// each row is sorted by column.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (r, c, v) in entries {
            if r >= n || c >= n {
                return Err(Error::InvalidArgument(format!("entry ({r}, {c}) outside {n}x{n}")));
            }
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::new(n, row_ptr, cols, vals)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.vals[k] * x[self.cols[k]];
                }
                s
            })
            .collect()
    }
}

/// One rank's rows of the matrix and right-hand side. This is the static
/// checkpoint payload.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRows {
    pub range: Range<usize>,
    pub global_rows: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LocalRows {
    pub fn from_global(a: &CsrMatrix, b: &[f64], range: Range<usize>) -> Self {
        let lo = a.row_ptr[range.start];
        let hi = a.row_ptr[range.end];
        Self {
            global_rows: a.n,
            row_ptr: a.row_ptr[range.start..=range.end].iter().map(|p| p - lo).collect(),
            cols: a.cols[lo..hi].to_vec(),
            vals: a.vals[lo..hi].to_vec(),
            rhs: b[range.clone()].to_vec(),
            range,
        }
    }

    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

impl RowBlock for LocalRows {
    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes)?;
        let start = d.u64()? as usize;
        let global_rows = d.u64()? as usize;
        let row_ptr = d.indices()?;
        let cols = d.indices()?;
        let vals = d.f64s()?;
        let rhs = d.f64s()?;
        d.finish()?;
        if row_ptr.len() != rhs.len() + 1 || row_ptr.last() != Some(&cols.len()) || cols.len() != vals.len() {
            return Err(Error::Codec("inconsistent row block".into()));
        }
        Ok(Self {
            range: start..start + rhs.len(),
            global_rows,
            row_ptr,
            cols,
            vals,
            rhs,
        })
    }

    fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.u64(self.range.start as u64)
            .u64(self.global_rows as u64)
            .indices(&self.row_ptr)
            .indices(&self.cols)
            .f64s(&self.vals)
            .f64s(&self.rhs);
        e.finish()
    }

    fn rows(&self) -> Range<usize> {
        self.range.clone()
    }

    fn slice(&self, rows: Range<usize>) -> Self {
        if rows.is_empty() {
            return Self {
                range: rows.start..rows.start,
                global_rows: self.global_rows,
                row_ptr: vec![0],
                cols: Vec::new(),
                vals: Vec::new(),
                rhs: Vec::new(),
            };
        }
        assert!(
            self.range.start <= rows.start && rows.end <= self.range.end,
            "slice {rows:?} outside {:?}",
            self.range
        );
        let a = rows.start - self.range.start;
        let b = rows.end - self.range.start;
        let lo = self.row_ptr[a];
        let hi = self.row_ptr[b];
        Self {
            global_rows: self.global_rows,
            row_ptr: self.row_ptr[a..=b].iter().map(|p| p - lo).collect(),
            cols: self.cols[lo..hi].to_vec(),
            vals: self.vals[lo..hi].to_vec(),
            rhs: self.rhs[a..b].to_vec(),
            range: rows,
        }
    }

    fn concat(parts: Vec<Self>) -> Result<Self> {
        let mut parts = parts.into_iter().filter(|p| !p.is_empty());
        let Some(mut out) = parts.next() else {
            return Err(Error::InvalidArgument("nothing to concatenate".into()));
        };
        for p in parts {
            if p.range.start != out.range.end {
                return Err(Error::InvalidArgument(format!(
                    "row blocks {:?} and {:?} are not adjacent",
                    out.range, p.range
                )));
            }
            let base = out.cols.len();
            out.row_ptr.extend(p.row_ptr[1..].iter().map(|q| q + base));
            out.cols.extend(p.cols);
            out.vals.extend(p.vals);
            out.rhs.extend(p.rhs);
            out.range.end = p.range.end;
        }
        Ok(out)
    }
}

/// Off-range vector entries a rank reads, and its column indices rewritten
/// to point into `[own rows.., halo..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportPattern {
    /// Sorted global indices of the halo entries.
    pub halo: Vec<usize>,
    /// For each owning rank, the positions in `halo` it supplies.
    pub sources: Vec<(usize, Range<usize>)>,
    pub local_cols: Vec<usize>,
}

impl ImportPattern {
    pub fn build(block: &LocalRows, dist: &BlockDistribution) -> Self {
        let own = &block.range;
        let mut halo: Vec<usize> = block.cols.iter().copied().filter(|c| !own.contains(c)).collect();
        halo.sort_unstable();
        halo.dedup();
        let mut sources: Vec<(usize, Range<usize>)> = Vec::new();
        for (i, &c) in halo.iter().enumerate() {
            let owner = dist.owner_of(c);
            match sources.last_mut() {
                Some((o, r)) if *o == owner => r.end = i + 1,
                _ => sources.push((owner, i..i + 1)),
            }
        }
        let local_cols = block
            .cols
            .iter()
            .map(|&c| {
                if own.contains(&c) {
                    c - own.start
                } else {
                    own.len() + halo.binary_search(&c).unwrap()
                }
            })
            .collect();
        Self {
            halo,
            sources,
            local_cols,
        }
    }
}

/// Block-row distributed matrix with its halo import patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    pub dist: BlockDistribution,
    pub blocks: Vec<LocalRows>,
    pub imports: Vec<ImportPattern>,
}

impl DistMatrix {
    pub fn from_global(a: &CsrMatrix, b: &[f64], dist: BlockDistribution) -> Result<Self> {
        if dist.rows() != a.n || b.len() != a.n {
            return Err(Error::InvalidArgument(format!(
                "distribution over {} rows for a {}-row system",
                dist.rows(),
                a.n
            )));
        }
        let blocks = (0..dist.ranks())
            .map(|r| LocalRows::from_global(a, b, dist.range(r)))
            .collect();
        Ok(Self::assemble(dist, blocks))
    }

    /// Rebuilds from per-rank blocks; the distribution is read off their row
    /// ranges and every import pattern is derived from scratch.
    pub fn from_blocks(blocks: Vec<LocalRows>) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.global_rows);
        let dist = BlockDistribution::from_ranges(rows, blocks.iter().map(|b| b.range.clone()).collect())?;
        Ok(Self::assemble(dist, blocks))
    }

    fn assemble(dist: BlockDistribution, blocks: Vec<LocalRows>) -> Self {
        let imports = blocks.iter().map(|b| ImportPattern::build(b, &dist)).collect();
        Self { dist, blocks, imports }
    }

    pub fn rows(&self) -> usize {
        self.dist.rows()
    }

    pub fn ranks(&self) -> usize {
        self.blocks.len()
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(LocalRows::nnz).sum()
    }

    /// Halo value messages of one product: each owner sends 8 bytes per
    /// requested entry.
    pub fn halo_messages(&self, world: &World) -> Vec<Message> {
        let mut msgs = Vec::new();
        for (dst, imp) in self.imports.iter().enumerate() {
            for (src, pos) in &imp.sources {
                msgs.push(world.message(RankId(*src), RankId(dst), 8 * pos.len()));
            }
        }
        msgs
    }

    /// Cost of agreeing on import patterns after a redistribution: every rank
    /// sends each owner the list of indices it needs.
    pub fn exchange_import_lists(&self, world: &mut World) -> Result<f64> {
        let mut msgs = Vec::new();
        for (rank, imp) in self.imports.iter().enumerate() {
            for (owner, pos) in &imp.sources {
                msgs.push(world.message(RankId(rank), RankId(*owner), 8 * pos.len()));
            }
        }
        world.exchange(&msgs)
    }

    pub fn rhs(&self) -> super::DistVector {
        super::DistVector::from_parts(self.blocks.iter().map(|b| b.rhs.clone()).collect())
    }

    /// The whole matrix, for checks and oracles.
    pub fn gather(&self) -> CsrMatrix {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for b in &self.blocks {
            let base = cols.len();
            row_ptr.extend(b.row_ptr[1..].iter().map(|p| p + base));
            cols.extend_from_slice(&b.cols);
            vals.extend_from_slice(&b.vals);
        }
        CsrMatrix {
            n: self.rows(),
            row_ptr,
            cols,
            vals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (CsrMatrix, Vec<f64>) {
        // 5x5 tridiagonal with a far coupling from row 0 to column 4.
        let mut t = Vec::new();
        for i in 0..5usize {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i < 4 {
                t.push((i, i + 1, -1.0));
            }
        }
        t.push((0, 4, 0.5));
        let a = CsrMatrix::from_triplets(5, t).unwrap();
        let b = (0..5).map(|i| i as f64).collect();
        (a, b)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(a.row_ptr, vec![0, 1, 2]);
        assert_eq!(a.vals, vec![2.0, 4.0]);
        assert!(CsrMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn import_pattern_covers_off_range_columns() {
        let (a, b) = small();
        let m = DistMatrix::from_global(&a, &b, BlockDistribution::canonical(5, 3).unwrap()).unwrap();
        // rank 0 owns rows 0..2 and reads 2 and 4
        assert_eq!(m.imports[0].halo, vec![2, 4]);
        assert_eq!(m.imports[0].sources, vec![(1, 0..1), (2, 1..2)]);
        // rank 1 owns 2..4 and reads 1 and 4
        assert_eq!(m.imports[1].halo, vec![1, 4]);
        for (blk, imp) in m.blocks.iter().zip(&m.imports) {
            for (k, &c) in blk.cols.iter().enumerate() {
                let l = imp.local_cols[k];
                let back = if l < blk.len() {
                    blk.range.start + l
                } else {
                    imp.halo[l - blk.len()]
                };
                assert_eq!(back, c);
            }
        }
        assert_eq!(m.gather(), a);
    }

    #[test]
    fn row_block_slices_and_glues() {
        let (a, b) = small();
        let whole = LocalRows::from_global(&a, &b, 0..5);
        let parts = vec![whole.slice(0..2), whole.slice(2..2), whole.slice(2..5)];
        assert_eq!(LocalRows::concat(parts).unwrap(), whole);
        let round = LocalRows::decode(&whole.slice(1..4).encode()).unwrap();
        assert_eq!(round, LocalRows::from_global(&a, &b, 1..4));
        assert!(LocalRows::concat(vec![whole.slice(0..1), whole.slice(2..3)]).is_err());
    }
}
