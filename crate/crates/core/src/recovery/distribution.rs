use std::ops::Range;

use crate::error::{Error, Result};

/// Contiguous block-row assignment of `rows` rows to ranks, in rank order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDistribution {
    rows: usize,
    ranges: Vec<Range<usize>>,
}

impl BlockDistribution {
    /// `R / P` rows per rank; the first `R mod P` ranks get one extra.
    pub fn canonical(rows: usize, ranks: usize) -> Result<Self> {
        if ranks == 0 {
            return Err(Error::InvalidArgument("cannot distribute over zero ranks".into()));
        }
        let base = rows / ranks;
        let extra = rows % ranks;
        let mut start = 0;
        let ranges = (0..ranks)
            .map(|r| {
                let len = base + usize::from(r < extra);
                let range = start..start + len;
                start += len;
                range
            })
            .collect();
        Ok(Self { rows, ranges })
    }

    /// Builds a distribution from explicit ranges, checking they tile `0..rows`.
    pub fn from_ranges(rows: usize, ranges: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for r in &ranges {
            if r.start != next || r.end < r.start {
                return Err(Error::InvalidArgument(format!(
                    "ranges must be contiguous and ordered (found {r:?} at row {next})"
                )));
            }
            next = r.end;
        }
        if next != rows || ranges.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "ranges cover 0..{next}, expected 0..{rows}"
            )));
        }
        Ok(Self { rows, ranges })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn ranks(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, rank: usize) -> Range<usize> {
        self.ranges[rank].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len_of(&self, rank: usize) -> usize {
        self.ranges[rank].len()
    }

    /// Rank owning global row `row`.
    pub fn owner_of(&self, row: usize) -> usize {
        assert!(row < self.rows, "row {row} out of 0..{}", self.rows);
        // First range whose end is past the row; empty ranges are skipped.
        self.ranges.partition_point(|r| r.end <= row)
    }

    /// Splits `rows` into runs that each lie inside one rank's range.
    pub fn split_by_owner(&self, rows: Range<usize>) -> Vec<(usize, Range<usize>)> {
        let mut out = Vec::new();
        let mut start = rows.start;
        while start < rows.end {
            let owner = self.owner_of(start);
            let end = rows.end.min(self.ranges[owner].end);
            out.push((owner, start..end));
            start = end;
        }
        out
    }
}

/// Minimum extra rows per survivor after one of `P` ranks fails:
/// `R/(P-1) - R/P`.
pub fn extra_rows_lower_bound(rows: usize, ranks: usize) -> Result<f64> {
    if ranks < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two ranks to lose one, got {ranks}"
        )));
    }
    let r = rows as f64;
    Ok(r / (ranks - 1) as f64 - r / ranks as f64)
}
