use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

use super::matrix::CsrMatrix;

/// 27-point stencil on an `n × n × n` grid with truncated boundaries:
/// diagonal 26, every other neighbor within Chebyshev distance 1 is -1.
/// The right-hand side is `A · 1`, so the exact solution is all ones.
pub fn generate_poisson27(n: usize) -> Result<(CsrMatrix, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid size must be at least 1".into()));
    }
    let rows = n * n * n;
    let mut row_ptr = Vec::with_capacity(rows + 1);
    row_ptr.push(0);
    let mut cols = Vec::with_capacity(rows * 27);
    let mut vals = Vec::with_capacity(rows * 27);
    let range = |c: usize| c.saturating_sub(1)..(c + 2).min(n);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let me = x + n * (y + n * z);
                for zz in range(z) {
                    for yy in range(y) {
                        for xx in range(x) {
                            let col = xx + n * (yy + n * zz);
                            cols.push(col);
                            vals.push(if col == me { 26.0 } else { -1.0 });
                        }
                    }
                }
                row_ptr.push(cols.len());
            }
        }
    }
    let a = CsrMatrix::new(rows, row_ptr, cols, vals)?;
    let b = a.matvec(&vec![1.0; rows]);
    Ok((a, b))
}

/// Reads a square `coordinate real general` Matrix Market matrix.
pub fn read_matrix_market(reader: impl BufRead) -> Result<CsrMatrix> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::MatrixMarket("empty file".into()))??;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::MatrixMarket(format!("bad header {header:?}")));
    }
    if fields[2] != "coordinate" || !matches!(fields[3].as_str(), "real" | "integer") || fields[4] != "general" {
        return Err(Error::MatrixMarket(format!(
            "only coordinate real general matrices are supported, got {}",
            fields[2..].join(" ")
        )));
    }

    let mut size = None;
    let mut entries = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parse_err = || Error::MatrixMarket(format!("line {}: cannot parse {line:?}", lineno + 2));
        let tok: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if tok.len() != 3 {
                    return Err(parse_err());
                }
                let dims: Vec<usize> = tok
                    .iter()
                    .map(|t| t.parse().map_err(|_| parse_err()))
                    .collect::<Result<_>>()?;
                if dims[0] != dims[1] {
                    return Err(Error::MatrixMarket(format!(
                        "matrix must be square, got {}x{}",
                        dims[0], dims[1]
                    )));
                }
                size = Some((dims[0], dims[2]));
                entries.reserve(dims[2]);
            }
            Some((n, _)) => {
                if tok.len() != 3 {
                    return Err(parse_err());
                }
                let r: usize = tok[0].parse().map_err(|_| parse_err())?;
                let c: usize = tok[1].parse().map_err(|_| parse_err())?;
                let v: f64 = tok[2].parse().map_err(|_| parse_err())?;
                if r == 0 || c == 0 || r > n || c > n {
                    return Err(Error::MatrixMarket(format!(
                        "line {}: index ({r}, {c}) outside 1..={n}",
                        lineno + 2
                    )));
                }
                entries.push((r - 1, c - 1, v));
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    if entries.len() != nnz {
        return Err(Error::MatrixMarket(format!(
            "expected {nnz} entries, found {}",
            entries.len()
        )));
    }
    CsrMatrix::from_triplets(n, entries)
}

/// Loads a Matrix Market file and pairs it with `b = A · 1`.
pub fn load_matrix_market(path: &Path) -> Result<(CsrMatrix, Vec<f64>)> {
    let file = std::fs::File::open(path)?;
    let a = read_matrix_market(std::io::BufReader::new(file))?;
    let b = a.matvec(&vec![1.0; a.n]);
    Ok((a, b))
}
