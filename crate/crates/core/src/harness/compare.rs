use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};

use super::report::ResultRow;

/// `substitute / shrink` for one quantity; `0 / 0` counts as 1.
fn ratio(sub: f64, shrink: f64) -> f64 {
    if sub == shrink {
        1.0
    } else {
        sub / shrink
    }
}

/// Shrink and substitute at one process count and failure count.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyComparison {
    pub p: usize,
    pub failures: usize,
    pub shrink: ResultRow,
    pub substitute: ResultRow,
}

impl StrategyComparison {
    pub fn slowdown_ratio(&self) -> f64 {
        ratio(self.substitute.slowdown, self.shrink.slowdown)
    }

    pub fn check_ratio(&self) -> f64 {
        ratio(self.substitute.pct_check, self.shrink.pct_check)
    }

    pub fn recovery_ratio(&self) -> f64 {
        ratio(self.substitute.pct_recovery, self.shrink.pct_recovery)
    }

    pub fn reconfig_ratio(&self) -> f64 {
        ratio(self.substitute.pct_reconfig, self.shrink.pct_reconfig)
    }

    pub fn recompute_ratio(&self) -> f64 {
        ratio(self.substitute.breakdown.t_recompute, self.shrink.breakdown.t_recompute)
    }
}

/// Pairs shrink and substitute rows by `(P, failures)`. Baseline rows are
/// ignored. Rows from different problems, duplicates and unpaired rows are
/// rejected.
pub fn compare_strategies(rows: &[ResultRow]) -> Result<Vec<StrategyComparison>> {
    let rows: Vec<&ResultRow> = rows.iter().filter(|r| r.strategy != "baseline").collect();
    if let Some(first) = rows.first() {
        if let Some(other) = rows.iter().find(|r| r.problem != first.problem) {
            return Err(Error::InvalidArgument(format!(
                "rows mix problems {:?} and {:?}",
                first.problem, other.problem
            )));
        }
    }
    let mut groups: BTreeMap<(usize, usize), (Option<&ResultRow>, Option<&ResultRow>)> = BTreeMap::new();
    for r in rows {
        let slot = groups.entry((r.p, r.failures)).or_default();
        let side = match r.strategy.as_str() {
            "shrink" => &mut slot.0,
            "substitute" => &mut slot.1,
            s => return Err(Error::InvalidArgument(format!("unknown strategy {s:?}"))),
        };
        if side.replace(r).is_some() {
            return Err(Error::InvalidArgument(format!(
                "two {} rows for P={} with {} failures",
                r.strategy, r.p, r.failures
            )));
        }
    }
    groups
        .into_iter()
        .map(|((p, failures), pair)| match pair {
            (Some(shrink), Some(substitute)) => Ok(StrategyComparison {
                p,
                failures,
                shrink: shrink.clone(),
                substitute: substitute.clone(),
            }),
            _ => Err(Error::InvalidArgument(format!(
                "P={p} with {failures} failures lacks a shrink or substitute row"
            ))),
        })
        .collect()
}

/// Plain-text side-by-side table.
pub fn render_comparison(cmp: &[StrategyComparison]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>5} {:>8} | {:>9} {:>9} | {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8}",
        "P", "failures", "slow_shr", "slow_sub", "chk%_shr", "chk%_sub", "rec%_shr", "rec%_sub", "cfg%_shr", "cfg%_sub"
    )
    .unwrap();
    for c in cmp {
        let (a, b) = (&c.shrink, &c.substitute);
        writeln!(
            out,
            "{:>5} {:>8} | {:>9.4} {:>9.4} | {:>8.3} {:>8.3} | {:>8.3} {:>8.3} | {:>8.4} {:>8.4}",
            c.p,
            c.failures,
            a.slowdown,
            b.slowdown,
            a.pct_check,
            b.pct_check,
            a.pct_recovery,
            b.pct_recovery,
            a.pct_reconfig,
            b.pct_reconfig
        )
        .unwrap();
    }
    out
}
