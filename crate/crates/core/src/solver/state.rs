use std::ops::Range;

use crate::checkpoint::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::recovery::{BlockDistribution, RowBlock};

use super::gmres::Hessenberg;
use super::vector::DistVector;

/// Iteration state every rank holds identically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Replicated {
    /// Outer iterations completed, over all cycles.
    pub step: u64,
    pub cycle: u64,
    pub hess: Hessenberg,
    pub breakdown: bool,
    pub bnorm: f64,
    /// Relative true residual at the start of each cycle.
    pub residual_history: Vec<f64>,
    /// Application operation counter when this state was current.
    pub ops: u64,
}

impl Replicated {
    fn write(&self, e: &mut Encoder) {
        e.u64(self.step)
            .u64(self.cycle)
            .u8(u8::from(self.breakdown))
            .f64(self.bnorm)
            .u64(self.ops)
            .f64s(&self.residual_history);
        let h = &self.hess;
        e.u64(h.h.len() as u64);
        for (hc, rc) in h.h.iter().zip(&h.r) {
            e.f64s(hc).f64s(rc);
        }
        e.f64s(&h.cs).f64s(&h.sn).f64s(&h.g);
    }

    fn read(d: &mut Decoder) -> Result<Self> {
        let step = d.u64()?;
        let cycle = d.u64()?;
        let breakdown = d.u8()? != 0;
        let bnorm = d.f64()?;
        let ops = d.u64()?;
        let residual_history = d.f64s()?;
        let cols = d.u64()? as usize;
        let mut hess = Hessenberg::default();
        for _ in 0..cols {
            hess.h.push(d.f64s()?);
            hess.r.push(d.f64s()?);
        }
        hess.cs = d.f64s()?;
        hess.sn = d.f64s()?;
        hess.g = d.f64s()?;
        if hess.cs.len() != cols || hess.sn.len() != cols || hess.g.len() != cols + 1 {
            return Err(Error::Codec("inconsistent Hessenberg".into()));
        }
        Ok(Self {
            step,
            cycle,
            hess,
            breakdown,
            bnorm,
            residual_history,
            ops,
        })
    }

    pub fn encoded_len(&self) -> usize {
        let mut e = Encoder::new();
        self.write(&mut e);
        e.finish().len()
    }
}

/// Flexible GMRES cycle state: `x_seed` is where the cycle started, `v` the
/// Arnoldi basis (`j + 1` columns) and `z` the preconditioned directions
/// (`j` columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x_seed: DistVector,
    pub v: Vec<DistVector>,
    pub z: Vec<DistVector>,
    pub rep: Replicated,
}

impl SolverState {
    /// Inner solves completed in the current cycle.
    pub fn j(&self) -> usize {
        self.z.len()
    }

    pub fn rank_state(&self, rank: usize, range: Range<usize>) -> RankState {
        let part = |v: &DistVector| v.parts[rank].clone();
        RankState {
            start: range.start,
            x_seed: part(&self.x_seed),
            v: self.v.iter().map(part).collect(),
            z: self.z.iter().map(part).collect(),
            rep: self.rep.clone(),
        }
    }

    /// One dynamic checkpoint payload per rank.
    pub fn payloads(&self, dist: &BlockDistribution) -> Vec<Vec<u8>> {
        (0..dist.ranks())
            .map(|r| self.rank_state(r, dist.range(r)).encode())
            .collect()
    }

    /// Reassembles from per-rank pieces, checking that the replicated parts
    /// agree bit for bit.
    pub fn from_ranks(ranks: Vec<RankState>) -> Result<Self> {
        let Some(first) = ranks.first() else {
            return Err(Error::InvalidArgument("no rank states".into()));
        };
        let rep = first.rep.clone();
        let (nv, nz) = (first.v.len(), first.z.len());
        for (k, r) in ranks.iter().enumerate() {
            if r.rep != rep || r.v.len() != nv || r.z.len() != nz {
                return Err(Error::InvalidArgument(format!(
                    "rank {k} disagrees with rank 0 on the replicated solver state"
                )));
            }
        }
        let gather = |f: &dyn Fn(&RankState) -> Vec<f64>| DistVector::from_parts(ranks.iter().map(f).collect());
        Ok(Self {
            x_seed: gather(&|r| r.x_seed.clone()),
            v: (0..nv).map(|i| gather(&|r| r.v[i].clone())).collect(),
            z: (0..nz).map(|i| gather(&|r| r.z[i].clone())).collect(),
            rep,
        })
    }
}

/// One rank's share of [`SolverState`]; the dynamic checkpoint payload.
#[derive(Debug, Clone, PartialEq)]
pub struct RankState {
    pub start: usize,
    pub x_seed: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub rep: Replicated,
}

impl RowBlock for RankState {
    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes)?;
        let start = d.u64()? as usize;
        let x_seed = d.f64s()?;
        let nv = d.u64()? as usize;
        let v = (0..nv).map(|_| d.f64s()).collect::<Result<Vec<_>>>()?;
        let nz = d.u64()? as usize;
        let z = (0..nz).map(|_| d.f64s()).collect::<Result<Vec<_>>>()?;
        let rep = Replicated::read(&mut d)?;
        d.finish()?;
        if v.iter().chain(&z).any(|c| c.len() != x_seed.len()) {
            return Err(Error::Codec("basis column length differs from the row count".into()));
        }
        Ok(Self {
            start,
            x_seed,
            v,
            z,
            rep,
        })
    }

    fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.u64(self.start as u64).f64s(&self.x_seed);
        e.u64(self.v.len() as u64);
        for c in &self.v {
            e.f64s(c);
        }
        e.u64(self.z.len() as u64);
        for c in &self.z {
            e.f64s(c);
        }
        self.rep.write(&mut e);
        e.finish()
    }

    fn rows(&self) -> Range<usize> {
        self.start..self.start + self.x_seed.len()
    }

    fn slice(&self, rows: Range<usize>) -> Self {
        let local = if rows.is_empty() {
            0..0
        } else {
            assert!(self.start <= rows.start && rows.end <= self.start + self.x_seed.len());
            rows.start - self.start..rows.end - self.start
        };
        let cut = |c: &Vec<f64>| c[local.clone()].to_vec();
        Self {
            start: rows.start,
            x_seed: cut(&self.x_seed),
            v: self.v.iter().map(cut).collect(),
            z: self.z.iter().map(cut).collect(),
            rep: self.rep.clone(),
        }
    }

    fn concat(parts: Vec<Self>) -> Result<Self> {
        let mut parts = parts.into_iter().filter(|p| !p.x_seed.is_empty());
        let Some(mut out) = parts.next() else {
            return Err(Error::InvalidArgument("nothing to concatenate".into()));
        };
        for p in parts {
            if p.start != out.start + out.x_seed.len() {
                return Err(Error::InvalidArgument("solver state pieces are not adjacent".into()));
            }
            if p.rep != out.rep || p.v.len() != out.v.len() || p.z.len() != out.z.len() {
                return Err(Error::InvalidArgument(
                    "solver state pieces come from different iterations".into(),
                ));
            }
            out.x_seed.extend(p.x_seed);
            for (a, b) in out.v.iter_mut().zip(p.v) {
                a.extend(b);
            }
            for (a, b) in out.z.iter_mut().zip(p.z) {
                a.extend(b);
            }
        }
        Ok(out)
    }

    fn replicated_bytes(&self) -> usize {
        self.rep.encoded_len()
    }

    fn adopt_replicated(&mut self, source: &Self) {
        self.rep = source.rep.clone();
    }
}
