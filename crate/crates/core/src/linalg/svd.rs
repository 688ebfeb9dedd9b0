use super::DenseMatrix;

/// Singular values in decreasing order, by one-sided Jacobi rotations on the
/// columns of `mat` (or of its transpose when it is wide).
pub fn singular_values(mat: &DenseMatrix) -> Vec<f64> {
    let work = if mat.cols() > mat.rows() {
        mat.transpose()
    } else {
        mat.clone()
    };
    let (m, n) = work.shape();
    if n == 0 {
        return Vec::new();
    }
    // column-major copy so rotations touch contiguous memory
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| work.column(j)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let a = cols[p][i];
                    let b = cols[q][i];
                    cols[p][i] = c * a - s * b;
                    cols[q][i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_values() {
        let d = DenseMatrix::diagonal(&[3.0, -5.0, 0.5]).unwrap();
        let sv = singular_values(&d);
        assert!((sv[0] - 5.0).abs() < 1e-14);
        assert!((sv[1] - 3.0).abs() < 1e-14);
        assert!((sv[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn frobenius_preserved_wide() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]]).unwrap();
        let sv = singular_values(&m);
        assert_eq!(sv.len(), 2);
        let fro: f64 = m.as_slice().iter().map(|v| v * v).sum();
        let s2: f64 = sv.iter().map(|v| v * v).sum();
        assert!((fro - s2).abs() < 1e-12);
    }
}
