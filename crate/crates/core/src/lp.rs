//! Dense two-phase primal simplex for small linear programs.
//!
//! Problems are `min c.x` over `x >= 0` with `<=`, `=` and `>=` rows. Pivoting
//! follows Bland's rule (lowest eligible index enters, lowest basic index
//! leaves on ratio ties), so the method cannot cycle and the returned vertex
//! is a deterministic function of the input. Every optimum is re-derived from
//! its basis by LU and certified by the duality gap.

use thiserror::Error;

use crate::linalg::{DenseMatrix, LuFactors};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
/// Certification threshold on `|c.x - b.y|`, relative to `1 + |c.x|`.
pub const DUALITY_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {0:e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("optimality certificate failed: duality gap {gap:e}, dual infeasibility {dual_violation:e}")]
    Certification { gap: f64, dual_violation: f64 },
    #[error("constraint has {got} coefficients, program has {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("basis matrix became singular")]
    SingularBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min objective.x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, in the original row orientation.
    pub duals: Vec<f64>,
    pub duality_gap: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.n_vars() {
            return Err(LpError::Dimension {
                expected: self.n_vars(),
                got: coeffs.len(),
            });
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        StandardForm::build(self).solve(self)
    }
}

/// `A x = b`, `b >= 0`, with slacks appended after the structural variables
/// and artificials after the slacks.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    /// -1 where the original row was negated to make its rhs nonnegative
    row_sign: Vec<f64>,
    n_struct: usize,
    n_cols: usize,
    first_artificial: usize,
    initial_basis: Vec<usize>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let m = lp.constraints.len();
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut rels = Vec::with_capacity(m);
        let mut row_sign = Vec::with_capacity(m);
        for c in &lp.constraints {
            let (sign, rel) = if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (-1.0, flipped)
            } else {
                (1.0, c.relation)
            };
            rows.push(c.coeffs.iter().map(|v| sign * v).collect::<Vec<f64>>());
            rhs.push(sign * c.rhs);
            rels.push(rel);
            row_sign.push(sign);
        }
        let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rels.iter().filter(|r| **r != Relation::Le).count();
        let first_artificial = n + n_slack;
        let n_cols = first_artificial + n_art;
        let mut a = vec![vec![0.0; n_cols]; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_artificial;
        for i in 0..m {
            a[i][..n].copy_from_slice(&rows[i]);
            match rels[i] {
                Relation::Le => {
                    a[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    a[i][slack] = -1.0;
                    slack += 1;
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let mut cost = vec![0.0; n_cols];
        cost[..n].copy_from_slice(&lp.objective);
        Self {
            a,
            b: rhs,
            cost,
            row_sign,
            n_struct: n,
            n_cols,
            first_artificial,
            initial_basis: basis,
        }
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let m = self.a.len();
        let pivot_limit = 50_000 + 100 * (m + self.n_cols);
        let mut tab = Tableau {
            rows: self
                .a
                .iter()
                .zip(&self.b)
                .map(|(r, &bv)| {
                    let mut row = r.clone();
                    row.push(bv);
                    row
                })
                .collect(),
            basis: self.initial_basis.clone(),
            active_rows: vec![true; m],
            pivots: 0,
        };

        if self.first_artificial < self.n_cols {
            let mut phase1 = vec![0.0; self.n_cols];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            let all = vec![true; self.n_cols];
            tab.optimize(&phase1, &all, pivot_limit)?;
            let residual: f64 = (0..m)
                .filter(|&i| tab.active_rows[i] && tab.basis[i] >= self.first_artificial)
                .map(|i| tab.rhs(i))
                .sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if residual > 1e-9 * scale {
                return Err(LpError::Infeasible(residual));
            }
            self.drive_out_artificials(&mut tab);
        }

        let allowed: Vec<bool> = (0..self.n_cols).map(|j| j < self.first_artificial).collect();
        tab.optimize(&self.cost, &allowed, pivot_limit)?;
        self.certify(lp, &tab)
    }

    fn drive_out_artificials(&self, tab: &mut Tableau) {
        for i in 0..tab.rows.len() {
            if !tab.active_rows[i] || tab.basis[i] < self.first_artificial {
                continue;
            }
            let entering = (0..self.first_artificial).find(|&j| tab.rows[i][j].abs() > 1e-9);
            match entering {
                Some(j) => tab.pivot(i, j),
                // redundant equality
                None => tab.active_rows[i] = false,
            }
        }
    }

    /// Recomputes the vertex and the duals from the final basis and checks
    /// primal feasibility, dual feasibility and the duality gap.
    fn certify(&self, lp: &LinearProgram, tab: &Tableau) -> Result<LpSolution, LpError> {
        let rows: Vec<usize> = (0..self.a.len()).filter(|&i| tab.active_rows[i]).collect();
        let r = rows.len();
        let basis: Vec<usize> = rows.iter().map(|&i| tab.basis[i]).collect();
        let mut x_full = vec![0.0; self.n_cols];
        let mut y_active = vec![0.0; r];
        if r > 0 {
            let bmat = DenseMatrix::from_fn(r, r, |p, q| self.a[rows[p]][basis[q]])
                .map_err(|_| LpError::SingularBasis)?;
            let lu = LuFactors::factor(&bmat).map_err(|_| LpError::SingularBasis)?;
            let rhs: Vec<f64> = rows.iter().map(|&i| self.b[i]).collect();
            let xb = lu.solve_vec(&rhs).map_err(|_| LpError::SingularBasis)?;
            for (q, &col) in basis.iter().enumerate() {
                x_full[col] = xb[q].max(0.0);
            }
            let lu_t = LuFactors::factor(&bmat.transpose()).map_err(|_| LpError::SingularBasis)?;
            let cb: Vec<f64> = basis.iter().map(|&col| self.cost[col]).collect();
            y_active = lu_t.solve_vec(&cb).map_err(|_| LpError::SingularBasis)?;
        }
        let mut y_std = vec![0.0; self.a.len()];
        for (p, &i) in rows.iter().enumerate() {
            y_std[i] = y_active[p];
        }
        let mut dual_violation: f64 = 0.0;
        for j in 0..self.first_artificial {
            let reduced = self.cost[j] - (0..self.a.len()).map(|i| self.a[i][j] * y_std[i]).sum::<f64>();
            dual_violation = dual_violation.max(-reduced);
        }
        let primal: f64 = (0..self.n_struct).map(|j| self.cost[j] * x_full[j]).sum();
        let dual: f64 = (0..self.a.len()).map(|i| self.b[i] * y_std[i]).sum();
        let gap = (primal - dual).abs();
        let cost_scale = 1.0 + self.cost.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if gap > DUALITY_GAP_TOL * (1.0 + primal.abs()) || dual_violation > DUALITY_GAP_TOL * cost_scale {
            return Err(LpError::Certification { gap, dual_violation });
        }
        let duals = y_std.iter().zip(&self.row_sign).map(|(y, s)| y * s).collect();
        Ok(LpSolution {
            x: x_full[..lp.n_vars()].to_vec(),
            objective: primal,
            duals,
            duality_gap: gap,
            pivots: tab.pivots,
        })
    }
}

struct Tableau {
    // each row: coefficients followed by the rhs
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    active_rows: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        *self.rows[i].last().expect("rhs column")
    }

    fn optimize(&mut self, cost: &[f64], allowed: &[bool], limit: usize) -> Result<(), LpError> {
        let n = cost.len();
        loop {
            if self.pivots > limit {
                return Err(LpError::IterationLimit(limit));
            }
            // reduced costs d_j = c_j - c_B B^{-1} A_j
            let mut entering = None;
            for j in 0..n {
                if !allowed[j] || self.basis.iter().zip(&self.active_rows).any(|(&b, &a)| a && b == j) {
                    continue;
                }
                let mut d = cost[j];
                for (i, row) in self.rows.iter().enumerate() {
                    if self.active_rows[i] {
                        d -= cost[self.basis[i]] * row[j];
                    }
                }
                if d < -COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !self.active_rows[i] || row[j] <= PIVOT_TOL {
                    continue;
                }
                let ratio = row[n] / row[j];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((i, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.rows[pr].len();
        let pv = self.rows[pr][pc];
        for v in self.rows[pr].iter_mut() {
            *v /= pv;
        }
        let pivot_row = self.rows[pr].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == pr {
                continue;
            }
            let f = row[pc];
            if f != 0.0 {
                for c in 0..width {
                    row[c] -= f * pivot_row[c];
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }
}
