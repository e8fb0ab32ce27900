use crate::error::{Error, Result};
use crate::simcore::World;

use super::matrix::DistMatrix;
use super::vector::{axpy, combine, dot, norm2, scale, spmv, DistVector};

/// Relative size below which a new Arnoldi vector counts as zero.
pub const BREAKDOWN_TOL: f64 = 1e-14;

/// Hessenberg least-squares problem reduced incrementally with Givens
/// rotations. Column `j` holds `j + 2` entries before reduction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Hessenberg {
    /// Columns as pushed, before rotation.
    pub h: Vec<Vec<f64>>,
    /// Columns after rotation (upper triangular part).
    pub r: Vec<Vec<f64>>,
    pub cs: Vec<f64>,
    pub sn: Vec<f64>,
    pub g: Vec<f64>,
}

impl Hessenberg {
    pub fn new(beta: f64) -> Self {
        Self {
            g: vec![beta],
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Current least-squares residual norm.
    pub fn residual(&self) -> f64 {
        self.g.last().copied().unwrap_or(0.0).abs()
    }

    /// Adds column `j` (length `j + 2`) and returns whether its subdiagonal
    /// entry signals breakdown.
    pub fn push(&mut self, col: Vec<f64>) -> bool {
        let j = self.h.len();
        assert_eq!(col.len(), j + 2, "Hessenberg column {j} needs {} entries", j + 2);
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let breakdown = col[j + 1] <= BREAKDOWN_TOL * norm;
        let mut r = col.clone();
        for i in 0..j {
            let t = self.cs[i] * r[i] + self.sn[i] * r[i + 1];
            r[i + 1] = -self.sn[i] * r[i] + self.cs[i] * r[i + 1];
            r[i] = t;
        }
        let (c, s) = givens(r[j], r[j + 1]);
        r[j] = c * r[j] + s * r[j + 1];
        r[j + 1] = 0.0;
        self.cs.push(c);
        self.sn.push(s);
        let gj = self.g[j];
        self.g[j] = c * gj;
        self.g.push(-s * gj);
        self.h.push(col);
        self.r.push(r);
        breakdown
    }

    /// Coefficients minimizing the least-squares residual.
    pub fn solve(&self) -> Vec<f64> {
        let k = self.r.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                s -= self.r[j][i] * yj;
            }
            y[i] = s / self.r[i][i];
        }
        y
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolve {
    pub z: DistVector,
    pub iterations: usize,
    pub breakdown: bool,
}

/// `m` steps of GMRES on `A z = v` from a zero guess.
///
/// `before_iteration(world, k)` runs ahead of iteration `k`. Stops early on
/// breakdown, in which case `z` is exact.
pub fn inner_solve(
    world: &mut World,
    a: &DistMatrix,
    v: &DistVector,
    m: usize,
    mut before_iteration: impl FnMut(&mut World, usize),
) -> Result<InnerSolve> {
    let beta = norm2(world, v)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(
            "inner solve needs a nonzero right-hand side".into(),
        ));
    }
    let mut basis = vec![v.clone()];
    scale(world, 1.0 / beta, &mut basis[0]);
    let mut hess = Hessenberg::new(beta);
    let mut breakdown = false;
    for k in 0..m {
        before_iteration(world, k);
        let mut w = spmv(world, a, &basis[k])?;
        let mut col = Vec::with_capacity(k + 2);
        for vi in &basis {
            let h = dot(world, &w, vi)?;
            axpy(world, -h, vi, &mut w);
            col.push(h);
        }
        let hn = norm2(world, &w)?;
        col.push(hn);
        breakdown = hess.push(col);
        if breakdown {
            break;
        }
        scale(world, 1.0 / hn, &mut w);
        basis.push(w);
    }
    let y = hess.solve();
    let zero = DistVector::from_parts(v.parts.iter().map(|p| vec![0.0; p.len()]).collect());
    let z = combine(world, &zero, &y, &basis[..y.len()]);
    Ok(InnerSolve {
        z,
        iterations: y.len(),
        breakdown,
    })
}
