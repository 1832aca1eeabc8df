//! Row-major dense matrices of `f64` and the reconstruction error measures
//! used throughout the crate.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// A dense real matrix stored row-major: `data[i * cols + j]` is entry `(i, j)`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from external data, rejecting empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        let m = Self { rows, cols, data };
        m.check_finite("matrix")?;
        Ok(m)
    }

    /// Unchecked constructor for data produced inside the crate.
    pub(crate) fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Panics on ragged input; meant for literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Fails with the position of the first NaN or infinity.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(idx) => Err(Error::NonFinite {
                context: context.to_string(),
                row: idx / self.cols,
                col: idx % self.cols,
                value: self.data[idx],
            }),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product; panics if inner dimensions disagree.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "t_matmul: row counts differ");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let rhs_row = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_t: column counts differ");
        Self::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.rows);
        let mut out = self.clone();
        for (i, &f) in factors.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry; zero for the empty case.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for v in self.row(i).iter().take(8) {
                write!(f, "{v:>12.6} ")?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_shape(context: &str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: context.to_string(),
            expected: a.shape(),
            got: b.shape(),
        });
    }
    Ok(())
}

/// `‖a − b‖_F`.
pub fn frobenius_error(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    same_shape("frobenius_error", a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// `Σᵢⱼ weightᵢⱼ · (wᵢⱼ − approxᵢⱼ)²`, the Fisher-weighted reconstruction
/// objective. Note the result is not square-rooted.
pub fn weighted_frobenius_error(
    w: &DenseMatrix,
    approx: &DenseMatrix,
    weight: &DenseMatrix,
) -> Result<f64> {
    same_shape("weighted_frobenius_error", w, approx)?;
    same_shape("weighted_frobenius_error (weights)", w, weight)?;
    if let Some(idx) = weight.data.iter().position(|v| *v < 0.0) {
        return Err(Error::NegativeWeight {
            context: "weighted_frobenius_error".into(),
            row: idx / weight.cols,
            col: idx % weight.cols,
            value: weight.data[idx],
        });
    }
    Ok(w.data
        .iter()
        .zip(&approx.data)
        .zip(&weight.data)
        .map(|((x, y), f)| f * (x - y) * (x - y))
        .sum())
}

/// Row-shared variant: row `i` of the error is weighted by `row_weights[i]`.
pub fn row_weighted_error(
    w: &DenseMatrix,
    approx: &DenseMatrix,
    row_weights: &[f64],
) -> Result<f64> {
    same_shape("row_weighted_error", w, approx)?;
    if row_weights.len() != w.rows() {
        return Err(Error::ShapeMismatch {
            context: "row_weighted_error (weights)".into(),
            expected: (w.rows(), 1),
            got: (row_weights.len(), 1),
        });
    }
    let weight = DenseMatrix::from_fn(w.rows(), w.cols(), |i, _| row_weights[i]);
    weighted_frobenius_error(w, approx, &weight)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_non_finite_and_names_entry() {
        let err = DenseMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 4.0]).unwrap_err();
        match err {
            Error::NonFinite { row, col, .. } => assert_eq!((row, col), (1, 0)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn frobenius_error_examples() {
        let a = DenseMatrix::from_rows(&[[3.0, 4.0]]);
        let z = DenseMatrix::zeros(1, 2);
        assert_eq!(frobenius_error(&a, &a).unwrap(), 0.0);
        assert_eq!(frobenius_error(&a, &z).unwrap(), 5.0);
        assert!(frobenius_error(&a, &DenseMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn weighted_error_examples() {
        let w = DenseMatrix::identity(2);
        let zero = DenseMatrix::zeros(2, 2);
        let fisher = DenseMatrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]]);
        assert_eq!(weighted_frobenius_error(&w, &zero, &fisher).unwrap(), 13.0);
        assert_eq!(weighted_frobenius_error(&w, &w, &fisher).unwrap(), 0.0);

        let a = DenseMatrix::from_rows(&[[1.0, -2.0, 0.5], [3.0, 0.0, 1.0]]);
        let b = DenseMatrix::from_rows(&[[0.0, 1.0, 0.5], [2.0, 2.0, -1.0]]);
        let ones = DenseMatrix::from_fn(2, 3, |_, _| 1.0);
        let plain = frobenius_error(&a, &b).unwrap();
        let weighted = weighted_frobenius_error(&a, &b, &ones).unwrap();
        assert!((weighted - plain * plain).abs() < 1e-12);
    }

    #[test]
    fn weighted_error_rejects_negative_weight() {
        let w = DenseMatrix::identity(2);
        let fisher = DenseMatrix::from_rows(&[[1.0, 0.0], [-1e-3, 1.0]]);
        assert!(matches!(
            weighted_frobenius_error(&w, &w, &fisher),
            Err(Error::NegativeWeight { row: 1, col: 0, .. })
        ));
    }

    #[test]
    fn products_agree() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let b = DenseMatrix::from_rows(&[[1.0, 0.0], [0.5, 2.0], [-1.0, 1.0]]);
        let ab = a.matmul(&b);
        assert_eq!(ab, DenseMatrix::from_rows(&[[-1.0, 7.0], [0.5, 16.0]]));
        assert_eq!(a.transpose().t_matmul(&b), ab);
        assert_eq!(a.matmul_t(&b.transpose()), ab);
    }
}
