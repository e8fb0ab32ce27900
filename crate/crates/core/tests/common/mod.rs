//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use ftsim::checkpoint::buddy_set;
use ftsim::recovery::{plan_shrink_transfers, BlockDistribution, HostingView};
use ftsim::solver::{CsrMatrix, SolverConfig};

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    norm(&d) / norm(y)
}

pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    norm(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>())
}

/// `min ‖beta e1 − H y‖` for a Hessenberg `H` stored by columns, by a fresh
/// Givens QR on every call. Returns `y` and the residual norm.
fn hessenberg_lsq(h: &[Vec<f64>], beta: f64) -> (Vec<f64>, f64) {
    let k = h.len();
    let mut r: Vec<Vec<f64>> = h.to_vec();
    let mut g = vec![0.0; k + 1];
    g[0] = beta;
    for j in 0..k {
        let (a, b) = (r[j][j], r[j][j + 1]);
        let d = a.hypot(b);
        let (c, s) = if b == 0.0 { (1.0, 0.0) } else { (a / d, b / d) };
        for col in r.iter_mut().skip(j) {
            let (x, y) = (col[j], col[j + 1]);
            col[j] = c * x + s * y;
            col[j + 1] = -s * x + c * y;
        }
        let (x, y) = (g[j], g[j + 1]);
        g[j] = c * x + s * y;
        g[j + 1] = -s * x + c * y;
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[j][i] * y[j]).sum();
        y[i] = (g[i] - s) / r[i][i];
    }
    (y, g[k].abs())
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Orthogonalizes `w` against `basis` (modified Gram-Schmidt). Returns the
/// Hessenberg column and whether it broke down.
fn arnoldi_step(basis: &[Vec<f64>], w: &mut [f64]) -> (Vec<f64>, bool) {
    let mut col = Vec::with_capacity(basis.len() + 1);
    for v in basis {
        let h = dot(w, v);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= h * vi;
        }
        col.push(h);
    }
    let hn = norm(w);
    col.push(hn);
    let broke = hn <= 1e-14 * norm(&col);
    (col, broke)
}

fn inner_gmres(a: &CsrMatrix, v: &[f64], m: usize) -> (Vec<f64>, usize) {
    let beta = norm(v);
    let mut basis = vec![v.iter().map(|x| x / beta).collect::<Vec<_>>()];
    let mut h: Vec<Vec<f64>> = Vec::new();
    for k in 0..m {
        let mut w = a.matvec(&basis[k]);
        let (col, broke) = arnoldi_step(&basis, &mut w);
        let hn = col[k + 1];
        h.push(col);
        if broke {
            break;
        }
        basis.push(w.iter().map(|x| x / hn).collect());
    }
    let (y, _) = hessenberg_lsq(&h, beta);
    let mut z = vec![0.0; v.len()];
    for (yi, q) in y.iter().zip(&basis) {
        for (zi, qi) in z.iter_mut().zip(q) {
            *zi += yi * qi;
        }
    }
    (z, y.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqResult {
    pub x: Vec<f64>,
    pub steps: u64,
    pub cycles: u64,
    pub inner_iterations: u64,
    pub residual: f64,
    pub converged: bool,
}

/// Restarted flexible GMRES on one address space: outer basis of at most
/// `m_outer` directions, each preconditioned by `m_inner` steps of GMRES
/// from zero; restart from the true residual at most `max_outer` times.
pub fn sequential_fgmres(a: &CsrMatrix, b: &[f64], cfg: &SolverConfig) -> SeqResult {
    let bnorm = norm(b);
    let mut x = vec![0.0; b.len()];
    let (mut steps, mut inner_total) = (0u64, 0u64);
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    let mut cycle = 0u64;
    if bnorm == 0.0 {
        return SeqResult {
            x,
            steps,
            cycles: 1,
            inner_iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    loop {
        let mut v = vec![r.iter().map(|t| t / rnorm).collect::<Vec<_>>()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut h: Vec<Vec<f64>> = Vec::new();
        loop {
            let j = zs.len();
            let (z, its) = inner_gmres(a, &v[j], cfg.m_inner);
            inner_total += its as u64;
            let mut w = a.matvec(&z);
            let (col, broke) = arnoldi_step(&v, &mut w);
            let hn = col[j + 1];
            h.push(col);
            zs.push(z);
            steps += 1;
            if !broke {
                v.push(w.iter().map(|t| t / hn).collect());
            }
            let (_, lsq) = hessenberg_lsq(&h, rnorm);
            if broke || zs.len() >= cfg.m_outer || lsq <= cfg.tol * bnorm {
                break;
            }
        }
        let (y, _) = hessenberg_lsq(&h, rnorm);
        for (yi, z) in y.iter().zip(&zs) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += yi * zi;
            }
        }
        let ax = a.matvec(&x);
        r = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        rnorm = norm(&r);
        cycle += 1;
        if rnorm / bnorm <= cfg.tol || cycle >= cfg.max_outer as u64 || rnorm == 0.0 {
            return SeqResult {
                x,
                steps,
                cycles: cycle,
                inner_iterations: inner_total,
                residual: rnorm,
                converged: rnorm / bnorm <= cfg.tol,
            };
        }
    }
}

/// Set-arithmetic check of a shrink plan: each survivor receives exactly
/// the rows of its new canonical range it did not own, once each, from a
/// live holder of a copy; with one failure nobody above it receives data.
pub fn check_shrink_plan(rows: usize, p: usize, failed: &BTreeSet<usize>, r: usize) -> Result<(), String> {
    let old = BlockDistribution::canonical(rows, p).map_err(|e| e.to_string())?;
    let view = HostingView::from_buddies(r, p, failed).map_err(|e| e.to_string())?;
    let plan = plan_shrink_transfers(&old, failed, &view).map_err(|e| e.to_string())?;
    let survivors: Vec<usize> = (0..p).filter(|x| !failed.contains(x)).collect();
    let owned_by = |rank: usize| -> BTreeSet<usize> {
        let (per, extra) = (rows / p, rows % p);
        let start = rank * per + rank.min(extra);
        (start..start + per + usize::from(rank < extra)).collect()
    };
    let (per, extra) = (rows / survivors.len(), rows % survivors.len());
    let mut start = 0;
    let mut covered = BTreeSet::new();
    for (d, &me) in survivors.iter().enumerate() {
        let len = per + usize::from(d < extra);
        let target: BTreeSet<usize> = (start..start + len).collect();
        start += len;
        let need: BTreeSet<usize> = target.difference(&owned_by(me)).copied().collect();
        let mut got = BTreeSet::new();
        for t in plan.transfers.iter().filter(|t| t.destination == d) {
            let owner = t.source.owner();
            let holder = t.source.holder();
            for row in t.rows.clone() {
                if !got.insert(row) {
                    return Err(format!("row {row} reaches {d} twice"));
                }
                if !owned_by(owner).contains(&row) {
                    return Err(format!("row {row} is not rank {owner}'s"));
                }
            }
            if failed.contains(&holder) {
                return Err(format!("{t:?} reads a failed rank"));
            }
            if holder != owner && !buddy_set(owner, r, p).contains(&holder) {
                return Err(format!("rank {holder} has no copy of rank {owner}"));
            }
        }
        if got != need {
            return Err(format!("destination {d}: got {got:?}, need {need:?}"));
        }
        covered.extend(target);
    }
    if covered != (0..rows).collect() {
        return Err("new layout leaves gaps".into());
    }
    if failed.len() == 1 {
        let f = *failed.iter().next().unwrap();
        if let Some(t) = plan.remote().find(|t| plan.survivors[t.destination] > f) {
            return Err(format!("rank above the failure receives {t:?}"));
        }
    }
    Ok(())
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
