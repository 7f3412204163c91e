//! Dense linear algebra over F_p: row reduction, rank, and linear solves.

use crate::error::{Error, Result};
use crate::field::PrimeFieldCtx;

/// Row-major dense matrix with entries in F_p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatGF {
    p: u32,
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl MatGF {
    pub fn zeros(p: u32, rows: usize, cols: usize) -> Self {
        Self {
            p,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(p: u32, rows: Vec<Vec<u8>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Self { p, rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.data[i * self.cols + j] = v;
    }

    fn fld(&self) -> PrimeFieldCtx {
        // n plays no role for scalar arithmetic.
        PrimeFieldCtx::new(self.p, 1).expect("valid prime")
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let f = self.fld();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(pr) = (row..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            if pr != row {
                for j in 0..self.cols {
                    let a = self.get(row, j);
                    let b = self.get(pr, j);
                    self.set(row, j, b);
                    self.set(pr, j, a);
                }
            }
            let inv = f.inv(self.get(row, col)).expect("nonzero pivot");
            for j in 0..self.cols {
                let v = f.mul(self.get(row, j), inv);
                self.set(row, j, v);
            }
            for r in 0..self.rows {
                if r != row && self.get(r, col) != 0 {
                    let factor = self.get(r, col);
                    for j in 0..self.cols {
                        let v = f.sub(self.get(r, j), f.mul(factor, self.get(row, j)));
                        self.set(r, j, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }
}

/// Solves `A x = b` over F_p by Gaussian elimination on the augmented matrix.
///
/// Returns the canonical solution with all free variables set to 0, or `None`
/// when the system is inconsistent.
pub fn solve(a: &MatGF, b: &[u8]) -> Result<Option<Vec<u8>>> {
    if b.len() != a.rows() {
        return Err(Error::Domain(format!(
            "right-hand side has {} entries for {} equations",
            b.len(),
            a.rows()
        )));
    }
    let mut aug = MatGF::zeros(a.p, a.rows, a.cols + 1);
    for (i, &rhs) in b.iter().enumerate() {
        for j in 0..a.cols {
            aug.set(i, j, a.get(i, j));
        }
        aug.set(i, a.cols, rhs);
    }
    let pivots = aug.rref();
    // Inconsistent iff some pivot lands in the augmented column.
    if pivots.last() == Some(&a.cols) {
        return Ok(None);
    }
    let mut x = vec![0u8; a.cols];
    for (row, &col) in pivots.iter().enumerate() {
        x[col] = aug.get(row, a.cols);
    }
    Ok(Some(x))
}
