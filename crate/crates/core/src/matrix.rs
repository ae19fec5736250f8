//! Dense row-major matrices and the schoolbook GEMM oracle.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::arith::AccWidth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("{rows}x{cols} matrix needs {} elements, got {got}", rows * cols)]
    DataLength {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("inner dimensions differ: {left} vs {right}")]
    InnerMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::DataLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map<U: Copy + Default>(&self, f: impl FnMut(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().copied().map(f).collect(),
        }
    }
}

impl Matrix<i8> {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| (r == c) as i8)
    }
}

/// Exact integer GEMM wrapped to `width`, sign-extended into `i32`.
/// `width` must not exceed 32 bits.
pub fn gemm_reference(
    a: &Matrix<i8>,
    b: &Matrix<i8>,
    width: AccWidth,
) -> Result<Matrix<i32>, MatrixError> {
    if a.cols != b.rows {
        return Err(MatrixError::InnerMismatch {
            left: a.cols,
            right: b.rows,
        });
    }
    let bt = b.transpose();
    Ok(Matrix::from_fn(a.rows, b.cols, |m, n| {
        let exact: i128 = a
            .row(m)
            .iter()
            .zip(bt.row(n))
            .map(|(&x, &y)| x as i128 * y as i128)
            .sum();
        width.wrap(exact) as i32
    }))
}
