//! Dense small-matrix numerics.
//!
//! Everything here is sized for networks of at most a few hundred nodes:
//! row-major `Vec<f64>` storage, partial-pivoting LU, Hessenberg + shifted QR
//! for eigenvalues and one-sided Jacobi for singular values.

mod csv;
mod eigen;
mod lu;
mod svd;

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::csv::{read_matrix_csv, write_matrix_csv, MATRIX_CSV_PRECISION};
pub use self::eigen::{eigenvalues, spectral_radius};
pub use self::lu::LuFactors;
pub use self::svd::singular_values;

/// Relative singular-value cutoff used for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("divergent system: spectral radius {radius} >= 1")]
    Divergent { radius: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("malformed matrix csv at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Induced matrix norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Maximum absolute column sum.
    One,
    /// Maximum absolute row sum.
    Infinity,
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self::new(n, n, data)
    }

    /// Builds a matrix from equally long rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::BadShape {
                    rows: rows.len(),
                    cols,
                    len: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, r) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * r;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &DenseMatrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `[self | rhs]`
    pub fn hstack(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "hstack",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(rhs.row(i));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> DenseMatrix {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        let mut out = Self::zeros(self.rows, end - start);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[start..end]);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        induced_norm(self, kind)
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
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Induced one- or infinity-norm.
pub fn induced_norm(mat: &DenseMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Infinity => (0..mat.rows)
            .map(|i| mat.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::One => (0..mat.cols)
            .map(|j| (0..mat.rows).map(|i| mat[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max),
    }
}

/// `(I - P)^{-1} B`, the map from anchor states to the limiting sensor states.
///
/// Fails with [`LinalgError::Divergent`] when `rho(P) >= 1`.
pub fn limit_map(p: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !p.is_square() {
        return Err(LinalgError::NotSquare {
            rows: p.rows,
            cols: p.cols,
        });
    }
    if b.rows != p.rows {
        return Err(LinalgError::DimensionMismatch {
            op: "limit_map",
            left: p.shape(),
            right: b.shape(),
        });
    }
    let radius = spectral_radius(p)?;
    if radius >= 1.0 {
        return Err(LinalgError::Divergent { radius });
    }
    let i_minus_p = DenseMatrix::identity(p.rows).sub(p)?;
    let lu = LuFactors::factor(&i_minus_p)?;
    let mut x = lu.solve(b)?;
    // one step of iterative refinement keeps the residual at LU roundoff level
    let resid = b.sub(&i_minus_p.matmul(&x)?)?;
    let corr = lu.solve(&resid)?;
    x = x.add(&corr)?;
    Ok(x)
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(mat: &DenseMatrix, tol: f64) -> usize {
    let sv = singular_values(mat);
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_by_hand() {
        let m = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.0]]).unwrap();
        assert_eq!(induced_norm(&m, NormKind::Infinity), 3.0);
        assert_eq!(induced_norm(&m, NormKind::One), 4.0);
        let id = DenseMatrix::identity(5);
        assert_eq!(induced_norm(&id, NormKind::Infinity), 1.0);
        assert_eq!(induced_norm(&id, NormKind::One), 1.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
        assert!(DenseMatrix::from_rows(&[[f64::INFINITY]]).is_err());
    }

    #[test]
    fn limit_map_of_zero_p_is_b() {
        let p = DenseMatrix::zeros(3, 3);
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let x = limit_map(&p, &b).unwrap();
        assert!(x.sub(&b).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn limit_map_scalar_geometric() {
        let alpha = 0.3;
        let p = DenseMatrix::identity(2).scale(alpha);
        let b = DenseMatrix::from_rows(&[[1.0], [-2.0]]).unwrap();
        let x = limit_map(&p, &b).unwrap();
        let expected = b.scale(1.0 / (1.0 - alpha));
        assert!(x.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn limit_map_rejects_divergent() {
        let p = DenseMatrix::diagonal(&[1.0, 0.2]).unwrap();
        let b = DenseMatrix::zeros(2, 1);
        assert!(matches!(limit_map(&p, &b), Err(LinalgError::Divergent { .. })));
    }

    #[test]
    fn rank_examples() {
        let u = [1.0, -2.0, 0.5];
        let v = [3.0, 1.0];
        let outer = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]).unwrap();
        assert_eq!(numerical_rank(&outer, DEFAULT_RANK_TOL), 1);
        let stacked = DenseMatrix::from_fn(5, 3, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(numerical_rank(&stacked, DEFAULT_RANK_TOL), 3);
        assert_eq!(numerical_rank(&DenseMatrix::zeros(2, 2), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn hstack_and_columns() {
        let a = DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[3.0, 4.0], [5.0, 6.0]]).unwrap();
        let f = a.hstack(&b).unwrap();
        assert_eq!(f.row(1), &[2.0, 5.0, 6.0]);
        assert_eq!(f.columns(1, 3), b);
        assert_eq!(f.columns(0, 1), a);
    }
}
