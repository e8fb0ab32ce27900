use std::ops::Range;

use crate::error::Result;
use crate::recovery::BlockDistribution;
use crate::simcore::World;

use super::matrix::DistMatrix;

/// Dense vector split into per-rank slices along a block distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector {
    pub parts: Vec<Vec<f64>>,
}

impl DistVector {
    pub fn from_parts(parts: Vec<Vec<f64>>) -> Self {
        Self { parts }
    }

    pub fn zeros(dist: &BlockDistribution) -> Self {
        Self {
            parts: (0..dist.ranks()).map(|r| vec![0.0; dist.len_of(r)]).collect(),
        }
    }

    pub fn from_global(v: &[f64], dist: &BlockDistribution) -> Self {
        Self {
            parts: dist.ranges().iter().map(|r| v[r.clone()].to_vec()).collect(),
        }
    }

    pub fn gather(&self) -> Vec<f64> {
        self.parts.concat()
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, rank: usize, rows: Range<usize>) -> &[f64] {
        &self.parts[rank][rows]
    }

    fn flops(&self, per_entry: f64) -> Vec<f64> {
        self.parts.iter().map(|p| per_entry * p.len() as f64).collect()
    }
}

/// `y = A x`: halo values are fetched per the import pattern, then each rank
/// multiplies its rows. Costs the halo exchange plus `2 nnz` flops per rank.
pub fn spmv(world: &mut World, a: &DistMatrix, x: &DistVector) -> Result<DistVector> {
    let msgs = a.halo_messages(world);
    world.exchange(&msgs)?;
    let flops: Vec<f64> = a.blocks.iter().map(|b| 2.0 * b.nnz() as f64).collect();
    world.compute(&flops);

    let mut parts = Vec::with_capacity(a.ranks());
    for (rank, (blk, imp)) in a.blocks.iter().zip(&a.imports).enumerate() {
        let mut ext = x.parts[rank].clone();
        for (owner, pos) in &imp.sources {
            let start = a.dist.range(*owner).start;
            ext.extend(imp.halo[pos.clone()].iter().map(|&c| x.parts[*owner][c - start]));
        }
        let mut y = vec![0.0; blk.len()];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in blk.row_ptr[i]..blk.row_ptr[i + 1] {
                s += blk.vals[k] * ext[imp.local_cols[k]];
            }
            *yi = s;
        }
        parts.push(y);
    }
    Ok(DistVector { parts })
}

/// Global inner product: local partial sums, then an allreduce in rank order.
pub fn dot(world: &mut World, u: &DistVector, v: &DistVector) -> Result<f64> {
    world.compute(&u.flops(2.0));
    let partials: Vec<f64> = u
        .parts
        .iter()
        .zip(&v.parts)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect();
    world.allreduce_sum(&partials)
}

pub fn norm2(world: &mut World, v: &DistVector) -> Result<f64> {
    Ok(dot(world, v, v)?.sqrt())
}

/// `y += alpha x`, rank-local.
pub fn axpy(world: &mut World, alpha: f64, x: &DistVector, y: &mut DistVector) {
    world.compute(&x.flops(2.0));
    for (yp, xp) in y.parts.iter_mut().zip(&x.parts) {
        for (a, b) in yp.iter_mut().zip(xp) {
            *a += alpha * b;
        }
    }
}

/// `x *= alpha`, rank-local.
pub fn scale(world: &mut World, alpha: f64, x: &mut DistVector) {
    world.compute(&x.flops(1.0));
    for p in &mut x.parts {
        for a in p.iter_mut() {
            *a *= alpha;
        }
    }
}

/// `x - y`, rank-local.
pub fn sub(world: &mut World, x: &DistVector, y: &DistVector) -> DistVector {
    world.compute(&x.flops(1.0));
    DistVector {
        parts: x
            .parts
            .iter()
            .zip(&y.parts)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
            .collect(),
    }
}

/// `base + Σ c_i v_i`, rank-local.
pub fn combine(world: &mut World, base: &DistVector, coeffs: &[f64], vecs: &[DistVector]) -> DistVector {
    world.compute(&base.flops(2.0 * coeffs.len() as f64));
    let mut out = base.clone();
    for (c, v) in coeffs.iter().zip(vecs) {
        for (op, vp) in out.parts.iter_mut().zip(&v.parts) {
            for (a, b) in op.iter_mut().zip(vp) {
                *a += c * b;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::WorldConfig;
    use crate::solver::{generate_poisson27, CsrMatrix};

    fn world(p: usize) -> World {
        World::new(&WorldConfig::new(p, 0, 2)).unwrap()
    }

    fn dist_matrix(a: &CsrMatrix, b: &[f64], p: usize) -> DistMatrix {
        DistMatrix::from_global(a, b, BlockDistribution::canonical(a.n, p).unwrap()).unwrap()
    }

    #[test]
    fn identity_product() {
        let a = CsrMatrix::from_triplets(6, (0..6).map(|i| (i, i, 1.0)).collect()).unwrap();
        let m = dist_matrix(&a, &[0.0; 6], 3);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let mut w = world(3);
        let y = spmv(&mut w, &m, &DistVector::from_global(&x, &m.dist)).unwrap();
        assert_eq!(y.gather(), x);
    }

    #[test]
    fn product_is_independent_of_rank_count() {
        let (a, b) = generate_poisson27(3).unwrap();
        let x: Vec<f64> = (0..a.n).map(|i| ((i * 7) % 11) as f64 / 3.0).collect();
        // oracle: dense row-by-row product in column order
        let mut dense = vec![vec![0.0; a.n]; a.n];
        for i in 0..a.n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                dense[i][a.cols[k]] = a.vals[k];
            }
        }
        let oracle: Vec<f64> = dense
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&x)
                    .filter(|(v, _)| **v != 0.0)
                    .fold(0.0, |s, (v, xi)| s + v * xi)
            })
            .collect();
        for p in [1, 3, 4] {
            let m = dist_matrix(&a, &b, p);
            let y = spmv(&mut world(p), &m, &DistVector::from_global(&x, &m.dist)).unwrap();
            assert_eq!(y.gather(), oracle, "P={p}");
        }
    }

    #[test]
    fn ones_vanish_on_interior_rows() {
        let (a, b) = generate_poisson27(3).unwrap();
        let m = dist_matrix(&a, &b, 2);
        let y = spmv(&mut world(2), &m, &DistVector::from_global(&vec![1.0; 27], &m.dist)).unwrap();
        assert_eq!(y.gather()[13], 0.0);
        assert_eq!(y.gather(), b);
    }

    #[test]
    fn dot_products() {
        let dist = BlockDistribution::canonical(12, 4).unwrap();
        let ones = DistVector::from_global(&[1.0; 12], &dist);
        let mut w = world(4);
        assert_eq!(dot(&mut w, &ones, &ones).unwrap(), 12.0);
        let u: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let v: Vec<f64> = (0..12).map(|i| if i % 2 == 1 { 3.0 } else { 0.0 }).collect();
        let d = dot(
            &mut w,
            &DistVector::from_global(&u, &dist),
            &DistVector::from_global(&v, &dist),
        )
        .unwrap();
        assert!(d.abs() <= 1e-15 * 6f64.sqrt() * 18f64.sqrt());

        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let seq: f64 = x.iter().map(|a| a * a).sum();
        for p in [1, 4] {
            let dist = BlockDistribution::canonical(12, p).unwrap();
            let xv = DistVector::from_global(&x, &dist);
            let d = dot(&mut world(p), &xv, &xv).unwrap();
            assert!((d - seq).abs() <= 1e-13 * seq.abs());
        }
    }

    #[test]
    fn halo_exchange_costs_time() {
        let (a, b) = generate_poisson27(4).unwrap();
        let m = dist_matrix(&a, &b, 4);
        let mut w = world(4);
        let x = DistVector::from_global(&vec![1.0; a.n], &m.dist);
        spmv(&mut w, &m, &x).unwrap();
        let flops = m.blocks.iter().map(|b| 2.0 * b.nnz() as f64).fold(0.0, f64::max);
        assert!(w.now() > flops * w.config().flop_time_s);
    }
}
