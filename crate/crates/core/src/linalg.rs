//! Small dense row-major `f64` matrices.
//!
//! Feature blocks and projection weights in this crate are desk-scale (tens of
//! rows, dozens of columns), so a contiguous `Vec<f64>` with explicit loops is
//! simpler to audit than a linear-algebra dependency — particularly for the
//! hand-written backprop in the gradient check, which touches every
//! intermediate. The JSON form is a plain nested array (`[[...], ...]`), which
//! is exactly the shape the file contracts use.
//!
//! Shape agreement between operands is a caller invariant; mismatches panic
//! with the offending dimensions. Data coming from files goes through
//! [`Mat::from_rows`], which reports ragged input as an error instead.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Rectangularity violation when building a matrix from nested rows.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ragged matrix: row {row} has {found} columns, expected {expected}")]
pub struct RaggedMatrixError {
    pub row: usize,
    pub expected: usize,
    pub found: usize,
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zeros matrix of the given shape.
    #[must_use]
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix by evaluating `f(row, col)` for every cell.
    #[must_use]
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from nested rows, rejecting ragged input. An empty outer vector
    /// yields the 0x0 matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, RaggedMatrixError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(RaggedMatrixError {
                    row: i,
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[must_use]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[must_use]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r},{c}) out of {}x{}",
            self.rows,
            self.cols
        );
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r},{c}) out of {}x{}",
            self.rows,
            self.cols
        );
        self.data[r * self.cols + c] = v;
    }

    /// Borrow row `r` as a slice.
    #[must_use]
    pub fn row(&self, r: usize) -> &[f64] {
        assert!(r < self.rows, "row {r} out of {}", self.rows);
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        assert!(r < self.rows, "row {r} out of {}", self.rows);
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Flat row-major view of the backing data.
    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable view of the backing row-major slice.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copy of rows `[offset, offset + count)` as a new matrix.
    #[must_use]
    pub fn row_block(&self, offset: usize, count: usize) -> Mat {
        assert!(offset + count <= self.rows, "row block out of range");
        Mat {
            rows: count,
            cols: self.cols,
            data: self.data[offset * self.cols..(offset + count) * self.cols].to_vec(),
        }
    }

    /// `self * rhs` for shapes (n x k) * (k x m) -> (n x m).
    #[must_use]
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhs^T` for shapes (n x k) * (m x k) -> (n x m).
    #[must_use]
    pub fn matmul_nt(&self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols, rhs.cols,
            "matmul_nt shape mismatch: {}x{} * ({}x{})^T",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        Mat::from_fn(self.rows, rhs.rows, |i, j| {
            let a = self.row(i);
            let b = rhs.row(j);
            a.iter().zip(b).map(|(x, y)| x * y).sum()
        })
    }

    /// `self^T * rhs` for shapes (k x n) * (k x m) -> (n x m).
    #[must_use]
    pub fn matmul_tn(&self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.rows, rhs.rows,
            "matmul_tn shape mismatch: ({}x{})^T * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Mat) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "add_assign shape mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Adds the vector `v` to every row.
    pub fn add_row_broadcast(&mut self, v: &[f64]) {
        assert_eq!(
            v.len(),
            self.cols,
            "broadcast length {} != cols {}",
            v.len(),
            self.cols
        );
        for r in 0..self.rows {
            for (a, b) in self.row_mut(r).iter_mut().zip(v) {
                *a += b;
            }
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// Returns a copy with `f` applied elementwise.
    #[must_use]
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Column sums as a vector of length `cols`.
    #[must_use]
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out
    }

    /// Sum of all entries.
    #[must_use]
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Stacks blocks vertically; all blocks must agree on column count.
    #[must_use]
    pub fn vstack(blocks: &[&Mat]) -> Mat {
        assert!(!blocks.is_empty(), "vstack of zero blocks");
        let cols = blocks[0].cols;
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack column mismatch");
            data.extend_from_slice(&b.data);
        }
        Mat { rows, cols, data }
    }

    /// Concatenates two matrices along the feature (column) axis.
    #[must_use]
    pub fn hstack(a: &Mat, b: &Mat) -> Mat {
        assert_eq!(
            a.rows, b.rows,
            "hstack row mismatch: {} vs {}",
            a.rows, b.rows
        );
        let mut out = Mat::zeros(a.rows, a.cols + b.cols);
        for r in 0..a.rows {
            out.row_mut(r)[..a.cols].copy_from_slice(a.row(r));
            out.row_mut(r)[a.cols..].copy_from_slice(b.row(r));
        }
        out
    }

    /// Largest absolute entry-wise difference between two same-shape matrices.
    #[must_use]
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "max_abs_diff shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// True when every entry is finite.
    #[must_use]
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let nested: Vec<&[f64]> = (0..self.rows).map(|r| self.row(r)).collect();
        nested.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let nested = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Mat::from_rows(nested).map_err(D::Error::custom)
    }
}
