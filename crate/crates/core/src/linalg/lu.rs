use super::{DenseMatrix, LinalgError, Result};

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    // unit-lower L below the diagonal, U on and above
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(LinalgError::Singular);
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        if b.rows() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "lu_solve",
                left: (n, n),
                right: b.shape(),
            });
        }
        let mut x = DenseMatrix::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for c in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(self.perm[i], c)];
            }
            self.solve_in_place(&mut col);
            for i in 0..n {
                x[(i, c)] = col[i];
            }
        }
        Ok(x)
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                op: "lu_solve",
                left: (self.n, self.n),
                right: (rhs.len(), 1),
            });
        }
        let mut col: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        self.solve_in_place(&mut col);
        Ok(col)
    }

    fn solve_in_place(&self, col: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * col[j];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * col[j];
            }
            col[i] = s / self.lu[i * n + i];
        }
    }
}
