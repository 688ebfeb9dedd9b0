//! Slow, direct reference computations for checking the `hdc-core` numerics.
//!
//! Everything here works on plain `Vec<Vec<f64>>` rows and shares no code with
//! the library it checks.

use num_complex::Complex64;

pub type Rows = Vec<Vec<f64>>;

pub fn mat_mul(a: &Rows, b: &Rows) -> Rows {
    let n = a.len();
    let inner = b.len();
    let m = if inner == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for k in 0..inner {
            let aik = a[i][k];
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn inf_norm(a: &Rows) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Rows, b: &Rows) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Rank by Gaussian elimination with complete pivoting. A pivot counts when it
/// exceeds `rel_tol` times the largest absolute entry of the input.
pub fn elimination_rank(a: &Rows, rel_tol: f64) -> usize {
    let mut m = a.clone();
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    loop {
        let mut best = (0.0, 0, 0);
        for i in (0..rows).filter(|&i| !row_used[i]) {
            for j in (0..cols).filter(|&j| !col_used[j]) {
                if m[i][j].abs() > best.0 {
                    best = (m[i][j].abs(), i, j);
                }
            }
        }
        if best.0 <= rel_tol * scale {
            return rank;
        }
        let (_, pi, pj) = best;
        row_used[pi] = true;
        col_used[pj] = true;
        rank += 1;
        for i in (0..rows).filter(|&i| !row_used[i]) {
            let f = m[i][pj] / m[pi][pj];
            if f != 0.0 {
                for j in 0..cols {
                    m[i][j] -= f * m[pi][j];
                }
            }
        }
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `1e-12 * max|a|`.
pub fn gauss_solve(a: &Rows, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Rows = a.clone();
    let mut rhs = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}

/// `sum_{k=0}^{terms} P^k B` accumulated term by term.
pub fn neumann_partial_sum(p: &Rows, b: &Rows, terms: usize) -> Rows {
    let mut term = b.clone();
    let mut acc = b.clone();
    for _ in 0..terms {
        term = mat_mul(p, &term);
        for (ra, rt) in acc.iter_mut().zip(&term) {
            for (x, t) in ra.iter_mut().zip(rt) {
                *x += t;
            }
        }
    }
    acc
}

fn complex_trace_resolvent(a: &Rows, z: Complex64) -> Option<Complex64> {
    // tr((zI - A)^{-1}) = f'(z)/f(z) for f(z) = det(zI - A).
    let n = a.len();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = Complex64::new(-a[i][j], 0.0);
                    if i == j {
                        v + z
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let mut inv: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))?;
        if m[piv][col].norm() == 0.0 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for c in 0..n {
            m[col][c] /= d;
            inv[col][c] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f.norm() != 0.0 {
                    for c in 0..n {
                        let mc = m[col][c];
                        let ic = inv[col][c];
                        m[r][c] -= f * mc;
                        inv[r][c] -= f * ic;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| inv[i][i]).sum())
}

/// Eigenvalues as the roots of `det(zI - A)`, found by simultaneous
/// Ehrlich-Aberth iteration driven by `f'/f = tr((zI - A)^{-1})`. No
/// polynomial coefficients or companion matrix are formed.
pub fn characteristic_roots(a: &Rows) -> Vec<Complex64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let radius = inf_norm(a).max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64) + 0.4;
            Complex64::from_polar(radius * (0.5 + 0.5 * (k as f64 + 1.0) / n as f64), theta)
        })
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let ratio = match complex_trace_resolvent(a, z[k]) {
                Some(r) => r,
                // z hit an eigenvalue exactly
                None => continue,
            };
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = ratio - repulsion;
            if denom.norm() == 0.0 {
                continue;
            }
            let step = denom.inv();
            z[k] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= 1e-15 * radius {
            break;
        }
    }
    z
}

pub fn characteristic_spectral_radius(a: &Rows) -> f64 {
    characteristic_roots(a)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Minimises `c.x` subject to `a_eq x = b_eq` and `a_le x <= b_le` by trying
/// every choice of active inequalities that completes a square system. The
/// feasible set must be pointed and the minimum finite. Returns `None` when no
/// feasible vertex exists.
pub fn vertex_enumeration_min(
    c: &[f64],
    a_eq: &Rows,
    b_eq: &[f64],
    a_le: &Rows,
    b_le: &[f64],
    feas_tol: f64,
) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    let eq_count = a_eq.len();
    if eq_count > n {
        return None;
    }
    let need = n - eq_count;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen: Vec<usize> = Vec::with_capacity(need);
    enumerate_subsets(a_le.len(), need, 0, &mut chosen, &mut |active| {
        let mut sys: Rows = a_eq.clone();
        let mut rhs: Vec<f64> = b_eq.to_vec();
        for &r in active {
            sys.push(a_le[r].clone());
            rhs.push(b_le[r]);
        }
        let Some(x) = gauss_solve(&sys, &rhs) else {
            return;
        };
        let eq_ok = a_eq
            .iter()
            .zip(b_eq)
            .all(|(row, &bv)| (dot(row, &x) - bv).abs() <= feas_tol * (1.0 + bv.abs()));
        let le_ok = a_le
            .iter()
            .zip(b_le)
            .all(|(row, &bv)| dot(row, &x) <= bv + feas_tol * (1.0 + bv.abs()));
        if eq_ok && le_ok {
            let val = dot(c, &x);
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, x));
            }
        }
    });
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn enumerate_subsets(
    total: usize,
    need: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    let remaining = need - chosen.len();
    for i in start..total {
        if total - i < remaining {
            break;
        }
        chosen.push(i);
        enumerate_subsets(total, need, i + 1, chosen, visit);
        chosen.pop();
    }
}

/// Minimum of `f` over the grid `h * Z^dim` intersected with the l1 ball of
/// radius `radius`. Intended for dimensions up to three.
pub fn l1_ball_grid_min(dim: usize, radius: f64, h: f64, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let steps = (radius / h).floor() as i64;
    let mut point = vec![0.0; dim];
    let mut best = f64::INFINITY;
    grid_walk(0, dim, steps, h, radius, &mut point, f, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn grid_walk(
    axis: usize,
    dim: usize,
    steps: i64,
    h: f64,
    radius: f64,
    point: &mut Vec<f64>,
    f: &dyn Fn(&[f64]) -> f64,
    best: &mut f64,
) {
    if axis == dim {
        let v = f(point);
        if v < *best {
            *best = v;
        }
        return;
    }
    let used: f64 = point[..axis].iter().map(|v| v.abs()).sum();
    for s in -steps..=steps {
        let v = s as f64 * h;
        if used + v.abs() > radius + 1e-12 {
            continue;
        }
        point[axis] = v;
        grid_walk(axis + 1, dim, steps, h, radius, point, f, best);
    }
    point[axis] = 0.0;
}

/// Brute-force optimum of one row of the weight-fitting problem, in epigraph
/// form over free weights. Column `c` of `target` may be matched by a free
/// anchor weight when `c` is in `free_cols`, and by `sum_j p_j neighbors[j][c]`.
/// With `budget = Some(eps)` returns the least total absolute residual with
/// `sum |p_j| <= eps`. With `None` returns the least `sum |p_j|` that fits
/// exactly, or `None` when no exact fit exists.
pub fn row_fit_min(free_cols: &[usize], neighbors: &Rows, target: &[f64], budget: Option<f64>) -> Option<f64> {
    let k = target.len();
    let (na, ns) = (free_cols.len(), neighbors.len());
    let exact = budget.is_none();
    let t0 = na + ns;
    let u0 = if exact { t0 } else { t0 + k };
    let n = u0 + ns;
    let fit_row = |col: usize| {
        let mut c = vec![0.0; n];
        if let Some(pos) = free_cols.iter().position(|&a| a == col) {
            c[pos] = 1.0;
        }
        for (pos, nb) in neighbors.iter().enumerate() {
            c[na + pos] = nb[col];
        }
        c
    };
    let (mut a_eq, mut b_eq, mut a_le, mut b_le) = (vec![], vec![], vec![], vec![]);
    for (col, &t) in target.iter().enumerate() {
        let base = fit_row(col);
        if exact {
            a_eq.push(base);
            b_eq.push(t);
        } else {
            let mut up = base.clone();
            up[t0 + col] = -1.0;
            a_le.push(up);
            b_le.push(t);
            let mut down: Vec<f64> = base.iter().map(|v| -v).collect();
            down[t0 + col] = -1.0;
            a_le.push(down);
            b_le.push(-t);
        }
    }
    for pos in 0..ns {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; n];
            c[na + pos] = sign;
            c[u0 + pos] = -1.0;
            a_le.push(c);
            b_le.push(0.0);
        }
    }
    let mut cost = vec![0.0; n];
    match budget {
        None => cost[u0..].fill(1.0),
        Some(eps) => {
            let mut mass = vec![0.0; n];
            mass[u0..].fill(1.0);
            a_le.push(mass);
            b_le.push(eps);
            cost[t0..u0].fill(1.0);
        }
    }
    vertex_enumeration_min(&cost, &a_eq, &b_eq, &a_le, &b_le, 1e-9).map(|(v, _)| v)
}
