//! Dense linear algebra over GF(2).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::Bits;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("line {line}: expected only '0' and '1', found {found:?}")]
    BadChar { line: usize, found: char },
    #[error("line {line}: row has {got} columns, expected {expected}")]
    RaggedRow {
        line: usize,
        got: usize,
        expected: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// XOR of equal-length bit strings, word at a time.
pub(crate) fn xor_assign(dst: &mut Bits, src: &Bits) {
    debug_assert_eq!(dst.len(), src.len());
    dst.force_align();
    let src = crate::delivery::head_aligned(src);
    for (d, s) in dst.as_raw_mut_slice().iter_mut().zip(src.as_raw_slice()) {
        *d ^= *s;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    cols: usize,
    rows: Vec<Bits>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![Bits::repeat(false, cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(cols: usize, rows: Vec<Bits>) -> Result<Self, MatrixError> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(MatrixError::RaggedRow {
                    line: i + 1,
                    got: r.len(),
                    expected: cols,
                });
            }
        }
        Ok(Self { cols, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r][c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.rows[r].set(c, v);
    }

    pub fn row(&self, r: usize) -> &Bits {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[Bits] {
        &self.rows
    }

    pub fn push_row(&mut self, row: Bits) {
        assert_eq!(row.len(), self.cols);
        self.rows.push(row);
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for c in row.iter_ones() {
                t.set(c, r, true);
            }
        }
        t
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Result<Gf2Matrix, MatrixError> {
        if self.cols != other.num_rows() {
            return Err(MatrixError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows.len(),
                self.cols,
                other.num_rows(),
                other.cols
            )));
        }
        let rows = self.rows.iter().map(|r| other.left_mul(r)).collect();
        Ok(Self {
            cols: other.cols,
            rows,
        })
    }

    /// Row vector times matrix: `x · M`.
    pub fn left_mul(&self, x: &Bits) -> Bits {
        assert_eq!(x.len(), self.rows.len());
        let mut out = Bits::repeat(false, self.cols);
        for i in x.iter_ones() {
            xor_assign(&mut out, &self.rows[i]);
        }
        out
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Gf2Matrix, Vec<usize>) {
        let t = rref_tracked(self);
        (t.reduced, t.pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{x : M xᵀ = 0}`, one vector per row of the result.
    pub fn null_space(&self) -> Gf2Matrix {
        let (r, pivots) = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let mut basis = Gf2Matrix::zeros(0, self.cols);
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = Bits::repeat(false, self.cols);
            v.set(free, true);
            for (i, &p) in pivots.iter().enumerate() {
                if r.get(i, free) {
                    v.set(p, true);
                }
            }
            basis.push_row(v);
        }
        basis
    }

    /// Inverse of a square matrix, if it is invertible.
    pub fn inverse(&self) -> Option<Gf2Matrix> {
        if self.rows.len() != self.cols {
            return None;
        }
        let t = rref_tracked(self);
        if t.pivots.len() != self.cols {
            return None;
        }
        Some(Gf2Matrix {
            cols: self.cols,
            rows: t.combos,
        })
    }
}

impl fmt::Display for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            for b in r.iter().by_vals() {
                f.write_str(if b { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Rows of `0`/`1` characters. Blank lines and `#` comments are skipped;
/// whitespace inside a row is ignored.
impl FromStr for Gf2Matrix {
    type Err = MatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rows = Vec::new();
        let mut cols = None;
        for (i, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Bits::new();
            for ch in line.chars().filter(|c| !c.is_whitespace()) {
                match ch {
                    '0' => row.push(false),
                    '1' => row.push(true),
                    found => return Err(MatrixError::BadChar { line: i + 1, found }),
                }
            }
            let expected = *cols.get_or_insert(row.len());
            if row.len() != expected {
                return Err(MatrixError::RaggedRow {
                    line: i + 1,
                    got: row.len(),
                    expected,
                });
            }
            rows.push(row);
        }
        Ok(Self {
            cols: cols.unwrap_or(0),
            rows,
        })
    }
}

/// RREF together with, for each nonzero reduced row, the combination of
/// original rows that produces it.
#[derive(Debug, Clone)]
pub struct TrackedRref {
    /// The `rank` nonzero rows in reduced form.
    pub reduced: Gf2Matrix,
    pub pivots: Vec<usize>,
    /// `combos[i]` has one bit per original row.
    pub combos: Vec<Bits>,
}

impl TrackedRref {
    /// If `e_col` lies in the row space, the combination of original rows
    /// summing to it.
    pub fn unit_combination(&self, col: usize) -> Option<&Bits> {
        let i = self.pivots.iter().position(|&p| p == col)?;
        (self.reduced.row(i).count_ones() == 1).then(|| &self.combos[i])
    }
}

pub fn rref_tracked(m: &Gf2Matrix) -> TrackedRref {
    let n = m.num_rows();
    let mut rows = m.rows.clone();
    let mut combos: Vec<Bits> = (0..n)
        .map(|i| {
            let mut b = Bits::repeat(false, n);
            b.set(i, true);
            b
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m.cols {
        let Some(p) = (r..n).find(|&i| rows[i][c]) else {
            continue;
        };
        rows.swap(r, p);
        combos.swap(r, p);
        let (pivot_row, pivot_combo) = (rows[r].clone(), combos[r].clone());
        for i in 0..n {
            if i != r && rows[i][c] {
                xor_assign(&mut rows[i], &pivot_row);
                xor_assign(&mut combos[i], &pivot_combo);
            }
        }
        pivots.push(c);
        r += 1;
        if r == n {
            break;
        }
    }
    rows.truncate(r);
    combos.truncate(r);
    TrackedRref {
        reduced: Gf2Matrix { cols: m.cols, rows },
        pivots,
        combos,
    }
}

/// Rank of up to 64-column rows packed in words. Destroys the input.
pub fn rank_of_words(rows: &mut [u64]) -> usize {
    let mut rank = 0;
    for i in 0..rows.len() {
        let r = rows[i];
        if r == 0 {
            continue;
        }
        let low = r & r.wrapping_neg();
        rank += 1;
        for row in rows[i + 1..].iter_mut() {
            if *row & low != 0 {
                *row ^= r;
            }
        }
    }
    rank
}
