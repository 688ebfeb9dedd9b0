//! Eigenvalues of real nonsymmetric matrices: balancing, Hessenberg reduction
//! by stabilised elimination, then Francis double-shift QR.

use super::{DenseMatrix, LinalgError, Result};

/// Subdiagonal entries below this fraction of their diagonal neighbours are
/// treated as zero.
const DEFLATION_TOL: f64 = 1e-12;
/// Total QR sweeps allowed per matrix dimension.
const SWEEPS_PER_DIM: usize = 100;

/// Maximum eigenvalue modulus.
pub fn spectral_radius(p: &DenseMatrix) -> Result<f64> {
    Ok(eigenvalues(p)?
        .iter()
        .map(|(re, im)| re.hypot(*im))
        .fold(0.0, f64::max))
}

/// All eigenvalues as `(re, im)` pairs, complex ones in conjugate pairs.
pub fn eigenvalues(p: &DenseMatrix) -> Result<Vec<(f64, f64)>> {
    if !p.is_square() {
        return Err(LinalgError::NotSquare {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    let n = p.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a: Vec<Vec<f64>> = p.to_rows();
    balance(&mut a);
    to_hessenberg(&mut a);
    hessenberg_qr(a)
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn to_hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            a.swap(piv, m);
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = 0.0;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix.
fn hessenberg_qr(mut a: Vec<Vec<f64>>) -> Result<Vec<(f64, f64)>> {
    let n = a.len();
    let mut out = vec![(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let max_sweeps = SWEEPS_PER_DIM * n;
    let mut sweeps = 0usize;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // find a negligible subdiagonal element
            let mut l = nu;
            while l > 0 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= DEFLATION_TOL * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                out[nu] = (x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    out[nu - 1] = (x + z, 0.0);
                    out[nu] = (if z != 0.0 { x - w / z } else { x + z }, 0.0);
                } else {
                    out[nu - 1] = (x + p, z);
                    out[nu] = (x + p, -z);
                }
                nn -= 2;
                break;
            }
            if sweeps >= max_sweeps {
                return Err(LinalgError::NoConvergence {
                    iterations: sweeps,
                    residual: a[nu][nu - 1].abs(),
                });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;
            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[i + 2][i] = 0.0;
                if i != m {
                    a[i + 2][i - 1] = 0.0;
                }
            }
            // double QR step on rows l..=nn and columns m..=nn
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k + 1 != nu { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k + 1 != nu {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_radius() {
        let d = DenseMatrix::diagonal(&[0.5, -0.8]).unwrap();
        assert!((spectral_radius(&d).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn scaled_rotation_radius() {
        for theta in [0.1f64, 1.0, 2.5, 3.0] {
            let r = DenseMatrix::from_rows(&[
                [0.9 * theta.cos(), -0.9 * theta.sin()],
                [0.9 * theta.sin(), 0.9 * theta.cos()],
            ])
            .unwrap();
            assert!((spectral_radius(&r).unwrap() - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn companion_like_cycle() {
        // permutation cycle scaled by 0.7: eigenvalues are 0.7 * cube roots of unity
        let c = DenseMatrix::from_rows(&[[0.0, 0.0, 0.7], [0.7, 0.0, 0.0], [0.0, 0.7, 0.0]]).unwrap();
        let ev = eigenvalues(&c).unwrap();
        assert_eq!(ev.len(), 3);
        for (re, im) in ev {
            assert!((re.hypot(im) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_and_size_preserved() {
        let m = DenseMatrix::from_rows(&[
            [1.0, 2.0, 0.0, -1.0],
            [0.5, -1.0, 3.0, 0.0],
            [0.0, 1.0, 0.2, 0.3],
            [2.0, 0.0, -0.4, 0.1],
        ])
        .unwrap();
        let ev = eigenvalues(&m).unwrap();
        let tr: f64 = ev.iter().map(|e| e.0).sum();
        assert!((tr - 0.3).abs() < 1e-10);
        let im_sum: f64 = ev.iter().map(|e| e.1).sum();
        assert!(im_sum.abs() < 1e-10);
    }

    #[test]
    fn rejects_rectangular() {
        assert!(matches!(
            spectral_radius(&DenseMatrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn tiny_sizes() {
        assert_eq!(spectral_radius(&DenseMatrix::zeros(0, 0)).unwrap(), 0.0);
        let one = DenseMatrix::from_rows(&[[-0.25]]).unwrap();
        assert_eq!(spectral_radius(&one).unwrap(), 0.25);
    }
}
