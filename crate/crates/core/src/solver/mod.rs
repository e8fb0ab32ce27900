//! Distributed inner–outer flexible GMRES on block-row matrices.

mod fgmres;
mod gmres;
mod matrix;
mod problem;
mod state;
mod vector;

pub use fgmres::{fgmres, CheckpointRecord, FaultTolerance, SolveOutcome, SolveStats, SolverConfig};
pub use gmres::{inner_solve, Hessenberg, InnerSolve, BREAKDOWN_TOL};
pub use matrix::{CsrMatrix, DistMatrix, ImportPattern, LocalRows};
pub use problem::{generate_poisson27, load_matrix_market, read_matrix_market};
pub use state::{RankState, Replicated, SolverState};
pub use vector::{axpy, combine, dot, norm2, scale, spmv, sub, DistVector};

use crate::error::Result;
use crate::simcore::World;

/// `‖b − A x‖₂`, identical at every rank.
pub fn residual_norm(world: &mut World, a: &DistMatrix, x: &DistVector, b: &DistVector) -> Result<f64> {
    let ax = spmv(world, a, x)?;
    let r = sub(world, b, &ax);
    norm2(world, &r)
}
