//! Dense row-major matrices over a [`Scalar`] field, block slicing and
//! assembly, the reference product, and polynomial interpolation.

mod interp;
mod io;
mod scalar;

use std::ops::Range;

use num_rational::BigRational;

use crate::error::{Error, Result};

pub use interp::{interpolate_matrix_poly, interpolation_weights, EvalPointSet, PointMode};
pub use scalar::Scalar;

/// Dense matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Double-precision matrix used for data, encoded chunks and products.
pub type Matrix = DenseMatrix<f64>;

/// Exact matrix used by the rational decode backend.
pub type RationalMatrix = DenseMatrix<BigRational>;

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().cloned().collect())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols).map(<[T]>::to_vec).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Copy of the block `row_range x col_range`.
    pub fn slice_block(&self, row_range: Range<usize>, col_range: Range<usize>) -> Result<Self> {
        if row_range.start >= row_range.end
            || col_range.start >= col_range.end
            || row_range.end > self.rows
            || col_range.end > self.cols
        {
            return Err(Error::OutOfRange(format!(
                "block rows {row_range:?} cols {col_range:?} outside {}x{}",
                self.rows, self.cols
            )));
        }
        let cols = col_range.len();
        let mut data = Vec::with_capacity(row_range.len() * cols);
        for i in row_range.clone() {
            data.extend_from_slice(&self.row(i)[col_range.clone()]);
        }
        Ok(Self {
            rows: row_range.len(),
            cols,
            data,
        })
    }

    /// Overwrite the block at `(row_offset, col_offset)` with `src`.
    pub fn place_block(&mut self, src: &Self, row_offset: usize, col_offset: usize) -> Result<()> {
        if row_offset + src.rows > self.rows || col_offset + src.cols > self.cols {
            return Err(Error::OutOfRange(format!(
                "{}x{} block at ({row_offset}, {col_offset}) overflows {}x{}",
                src.rows, src.cols, self.rows, self.cols
            )));
        }
        for i in 0..src.rows {
            let start = (row_offset + i) * self.cols + col_offset;
            self.data[start..start + src.cols].clone_from_slice(src.row(i));
        }
        Ok(())
    }

    /// Zero-pad to `rows x cols` (bottom and right).
    pub fn padded(&self, rows: usize, cols: usize) -> Self {
        assert!(rows >= self.rows && cols >= self.cols);
        if rows == self.rows && cols == self.cols {
            return self.clone();
        }
        let mut out = Self::zeros(rows, cols);
        out.place_block(self, 0, 0).expect("padding fits");
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: &T, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        T::axpy(&mut self.data, s, &other.data);
        Ok(())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl Matrix {
    /// Exact rational copy; every finite double is representable.
    pub fn to_rational(&self) -> RationalMatrix {
        self.map(|v| <BigRational as Scalar>::from_f64(*v).expect("finite by construction"))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||self - reference||_F / ||reference||_F` (absolute when the reference is zero).
    pub fn relative_error(&self, reference: &Matrix) -> Result<f64> {
        let diff = self.sub(reference)?.frobenius_norm();
        let norm = reference.frobenius_norm();
        Ok(if norm == 0.0 { diff } else { diff / norm })
    }
}

impl RationalMatrix {
    pub fn to_f64(&self) -> Matrix {
        self.map(Scalar::to_f64)
    }
}

/// Reference product `a * b`.
pub fn mat_mul<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let n = b.cols;
    let mut out = DenseMatrix::zeros(a.rows, n);
    for (i, acc) in out.data.chunks_mut(n).enumerate() {
        for (k, aik) in a.row(i).iter().enumerate() {
            if !aik.is_zero() {
                T::axpy(acc, aik, b.row(k));
            }
        }
    }
    Ok(out)
}
