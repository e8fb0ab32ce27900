use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simcore::{Phase, SimClock};

/// Where simulated time went, in seconds, plus the checkpoint traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OverheadBreakdown {
    pub useful: f64,
    pub t_check: f64,
    /// Failure detection and agreement.
    pub t_pfd: f64,
    /// Communicator repair and data-structure rebuild.
    pub t_pfr: f64,
    /// Checkpointed state moved to its new owners.
    pub t_pfx: f64,
    /// Work re-executed after a rollback.
    pub t_recompute: f64,
    pub bytes_checkpointed: u64,
    pub bytes_recovered: u64,
}

impl OverheadBreakdown {
    pub fn from_clock(clock: &SimClock) -> Self {
        Self {
            useful: clock.phase_time(Phase::Useful),
            t_check: clock.phase_time(Phase::Checkpoint),
            t_pfd: clock.phase_time(Phase::Detection),
            t_pfr: clock.phase_time(Phase::Reconfiguration),
            t_pfx: clock.phase_time(Phase::Recovery),
            t_recompute: clock.phase_time(Phase::Recompute),
            bytes_checkpointed: 0,
            bytes_recovered: 0,
        }
    }

    pub fn total(&self) -> f64 {
        self.useful + compute_waste(self)
    }
}

/// `t_check + t_PF-d + t_PF-r + t_PF-x + t_recompute`.
pub fn compute_waste(b: &OverheadBreakdown) -> f64 {
    b.t_check + b.t_pfd + b.t_pfr + b.t_pfx + b.t_recompute
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    /// Hit the outer-cycle limit first.
    NotConverged,
    /// A failure destroyed state the run needed.
    Unrecoverable,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::NotConverged => "not_converged",
            RunStatus::Unrecoverable => "unrecoverable",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(RunStatus::Converged),
            "not_converged" => Ok(RunStatus::NotConverged),
            "unrecoverable" => Ok(RunStatus::Unrecoverable),
            _ => Err(Error::InvalidArgument(format!("unknown run status {s:?}"))),
        }
    }
}

/// One line of results.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub p: usize,
    /// `shrink`, `substitute` or `baseline`.
    pub strategy: String,
    pub problem: String,
    /// Failures that actually fired.
    pub failures: usize,
    pub total_s: f64,
    pub breakdown: OverheadBreakdown,
    /// `total_s` over the unprotected run's total at the same P.
    pub slowdown: f64,
    pub pct_check: f64,
    /// Detection, reconfiguration and state recovery together.
    pub pct_recovery: f64,
    pub pct_reconfig: f64,
    pub status: RunStatus,
}

impl ResultRow {
    /// `total_s` is the simulated clock at the end of the run; the
    /// problem label starts empty.
    pub fn new(
        p: usize,
        strategy: &str,
        failures: usize,
        total: f64,
        breakdown: OverheadBreakdown,
        baseline_total: f64,
        status: RunStatus,
    ) -> Self {
        let pct = |x: f64| if total > 0.0 { 100.0 * x / total } else { 0.0 };
        Self {
            p,
            strategy: strategy.to_string(),
            problem: String::new(),
            failures,
            total_s: total,
            slowdown: if baseline_total > 0.0 {
                total / baseline_total
            } else {
                1.0
            },
            pct_check: pct(breakdown.t_check),
            pct_recovery: pct(breakdown.t_pfd + breakdown.t_pfr + breakdown.t_pfx),
            pct_reconfig: pct(breakdown.t_pfr),
            breakdown,
            status,
        }
    }

    /// `|total − (useful + waste)| / total`.
    pub fn closure_error(&self) -> f64 {
        let sum = self.breakdown.total();
        if self.total_s == 0.0 {
            sum.abs()
        } else {
            (self.total_s - sum).abs() / self.total_s
        }
    }

    /// State recovery time: reconfiguration plus data movement.
    pub fn recovery_s(&self) -> f64 {
        self.breakdown.t_pfr + self.breakdown.t_pfx
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "P",
    "strategy",
    "failures",
    "total_s",
    "t_check_s",
    "t_pfd_s",
    "t_pfr_s",
    "t_pfx_s",
    "t_recompute_s",
    "slowdown",
    "pct_check",
    "pct_recovery",
    "pct_reconfig",
    "useful_s",
    "bytes_checkpointed",
    "bytes_recovered",
    "status",
];

/// Seconds get 12 decimals, ratios and percentages 6.
fn secs(x: f64) -> String {
    format!("{x:.12}")
}

fn ratio(x: f64) -> String {
    format!("{x:.6}")
}

fn record(row: &ResultRow) -> Vec<String> {
    let b = &row.breakdown;
    vec![
        row.p.to_string(),
        row.strategy.clone(),
        row.failures.to_string(),
        secs(row.total_s),
        secs(b.t_check),
        secs(b.t_pfd),
        secs(b.t_pfr),
        secs(b.t_pfx),
        secs(b.t_recompute),
        ratio(row.slowdown),
        ratio(row.pct_check),
        ratio(row.pct_recovery),
        ratio(row.pct_reconfig),
        secs(b.useful),
        b.bytes_checkpointed.to_string(),
        b.bytes_recovered.to_string(),
        row.status.to_string(),
    ]
}

/// Writes the header and one record per row. The problem label is not a
/// column; rows from one CSV are expected to share it.
pub fn write_csv(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

/// Reads rows written by [`write_csv`]; `problem` comes back empty.
pub fn parse_csv(input: impl Read) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("column {}: bad number {:?}", CSV_HEADER[i], &rec[i])))
        };
        let u = |i: usize| -> Result<u64> {
            rec[i]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("column {}: bad integer {:?}", CSV_HEADER[i], &rec[i])))
        };
        rows.push(ResultRow {
            p: u(0)? as usize,
            strategy: rec[1].to_string(),
            problem: String::new(),
            failures: u(2)? as usize,
            total_s: f(3)?,
            breakdown: OverheadBreakdown {
                t_check: f(4)?,
                t_pfd: f(5)?,
                t_pfr: f(6)?,
                t_pfx: f(7)?,
                t_recompute: f(8)?,
                useful: f(13)?,
                bytes_checkpointed: u(14)?,
                bytes_recovered: u(15)?,
            },
            slowdown: f(9)?,
            pct_check: f(10)?,
            pct_recovery: f(11)?,
            pct_reconfig: f(12)?,
            status: rec[16].parse()?,
        });
    }
    Ok(rows)
}
