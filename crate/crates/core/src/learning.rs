//! Inverse problem: choose sparse weights `(B, P)` whose limit map
//! `(I - P)^{-1} B` approximates a target `W`.
//!
//! Under the infinity-induced norm both objectives split by rows:
//! `f1 = ||B + PW - W||_inf` is the largest row residual in l1, and
//! `f2 = ||P||_inf` the largest row l1 mass. Each row is then a small
//! l1-regression LP with an l1 budget on its sensor weights.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, NetworkGraph};
use crate::linalg::{
    induced_norm, limit_map, numerical_rank, spectral_radius, DenseMatrix, LinalgError, NormKind,
    DEFAULT_RANK_TOL,
};
use crate::lp::{LinearProgram, LpError, Relation};

/// Number of uniform grid points on `[0, DEFAULT_GRID_MAX]`.
pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_GRID_MAX: f64 = 0.99;
/// Extra budgets `1 - 10^-k` added when no exact solution exists.
pub const REFINEMENT_EXPONENTS: [i32; 2] = [3, 4];
/// Residuals at or below this are treated as an exact fit.
pub const EXACT_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("norm budget must lie in [0, 1), got {0}")]
    InvalidEps(f64),
    #[error("invalid budget grid: {0}")]
    InvalidGrid(String),
    #[error("only the infinity-induced norm decomposes into row programs")]
    UnsupportedNorm,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("utility is undefined for ||P|| = {0} >= 1")]
    UndefinedUtility(f64),
    #[error("unachievable cost {c_o}: infimum cost is {c_inf}")]
    UnachievableCost { c_o: f64, c_inf: f64 },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, LearningError>;

/// Network, target and budget grid for one learning problem.
#[derive(Debug, Clone)]
pub struct LearningSpec {
    graph: Arc<NetworkGraph>,
    w: DenseMatrix,
    norm_kind: NormKind,
    eps_grid: Vec<f64>,
    refine_near_one: bool,
}

impl LearningSpec {
    /// Uses the default grid with refinement near one.
    pub fn new(graph: Arc<NetworkGraph>, w: DenseMatrix) -> Result<Self> {
        let (m, k) = (graph.n_sensors(), graph.n_anchors());
        if w.shape() != (m, k) {
            return Err(LearningError::Dimension(format!(
                "target must be {m}x{k}, got {:?}",
                w.shape()
            )));
        }
        Ok(Self {
            graph,
            w,
            norm_kind: NormKind::Infinity,
            eps_grid: default_grid(),
            refine_near_one: true,
        })
    }

    /// Replaces the grid; it must be nonempty, strictly increasing and inside
    /// `[0, 1)`. Custom grids are used as given, without refinement.
    pub fn with_grid(mut self, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(LearningError::InvalidGrid("grid is empty".into()));
        }
        if let Some(&bad) = grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(LearningError::InvalidGrid(format!("{bad} is outside [0, 1)")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LearningError::InvalidGrid("grid is not strictly increasing".into()));
        }
        self.eps_grid = grid;
        self.refine_near_one = false;
        Ok(self)
    }

    pub fn with_norm(mut self, kind: NormKind) -> Result<Self> {
        if kind != NormKind::Infinity {
            return Err(LearningError::UnsupportedNorm);
        }
        self.norm_kind = kind;
        Ok(self)
    }

    pub fn graph(&self) -> &Arc<NetworkGraph> {
        &self.graph
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn eps_grid(&self) -> &[f64] {
        &self.eps_grid
    }

    pub fn n_sensors(&self) -> usize {
        self.w.rows()
    }

    pub fn n_anchors(&self) -> usize {
        self.w.cols()
    }
}

pub fn default_grid() -> Vec<f64> {
    let last = (DEFAULT_GRID_POINTS - 1) as f64;
    (0..DEFAULT_GRID_POINTS)
        .map(|j| DEFAULT_GRID_MAX * j as f64 / last)
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(LearningError::InvalidEps(eps));
    }
    Ok(())
}

/// Column layout of a row program: split anchor weights, split sensor
/// weights and, optionally, split residuals per anchor column.
struct RowLayout {
    anchors: Vec<usize>,
    sensors: Vec<usize>,
    n_anchor_cols: usize,
    with_residuals: bool,
}

impl RowLayout {
    fn new(ws: &LearningSpec, row: usize, with_residuals: bool) -> Self {
        Self {
            anchors: ws.graph.allowed_anchors(row),
            sensors: ws.graph.allowed_sensors(row),
            n_anchor_cols: ws.n_anchors(),
            with_residuals,
        }
    }

    fn p_offset(&self) -> usize {
        2 * self.anchors.len()
    }

    fn s_offset(&self) -> usize {
        self.p_offset() + 2 * self.sensors.len()
    }

    fn n_vars(&self) -> usize {
        self.s_offset() + if self.with_residuals { 2 * self.n_anchor_cols } else { 0 }
    }

    fn weight_mass_coeffs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_vars()];
        c[self.p_offset()..self.s_offset()].fill(1.0);
        c
    }

    fn residual_mass_coeffs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_vars()];
        c[self.s_offset()..].fill(1.0);
        c
    }

    /// One equality per anchor column `k`: `b_k + (p W)_k - r_k = w_ik`.
    fn add_fit_rows(&self, lp: &mut LinearProgram, w: &DenseMatrix, row: usize) -> Result<()> {
        for k in 0..self.n_anchor_cols {
            let mut c = vec![0.0; self.n_vars()];
            if let Some(pos) = self.anchors.iter().position(|&a| a == k) {
                c[2 * pos] = 1.0;
                c[2 * pos + 1] = -1.0;
            }
            for (pos, &j) in self.sensors.iter().enumerate() {
                let col = self.p_offset() + 2 * pos;
                c[col] = w[(j, k)];
                c[col + 1] = -w[(j, k)];
            }
            if self.with_residuals {
                let col = self.s_offset() + 2 * k;
                c[col] = -1.0;
                c[col + 1] = 1.0;
            }
            lp.add_constraint(c, Relation::Eq, w[(row, k)])?;
        }
        Ok(())
    }

    fn decode(&self, x: &[f64], n_sensors: usize) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![0.0; self.n_anchor_cols];
        for (pos, &a) in self.anchors.iter().enumerate() {
            b[a] = x[2 * pos] - x[2 * pos + 1];
        }
        let mut p = vec![0.0; n_sensors];
        for (pos, &j) in self.sensors.iter().enumerate() {
            let col = self.p_offset() + 2 * pos;
            p[j] = x[col] - x[col + 1];
        }
        (b, p)
    }
}

fn row_residual(ws: &LearningSpec, row: usize, b: &[f64], p: &[f64]) -> f64 {
    (0..ws.n_anchors())
        .map(|k| {
            let pw: f64 = p.iter().enumerate().map(|(j, pj)| pj * ws.w[(j, k)]).sum();
            (b[k] + pw - ws.w[(row, k)]).abs()
        })
        .sum()
}

/// Optimal weights for a single sensor row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    pub b: Vec<f64>,
    pub p: Vec<f64>,
    /// `||b + p W - w_i||_1`
    pub residual: f64,
}

/// Minimises `||b_i + p_i W - w_i||_1` over sparsity-feasible rows with
/// `||p_i||_1 <= eps`.
pub fn solve_row(ws: &LearningSpec, row: usize, eps: f64) -> Result<RowSolution> {
    check_eps(eps)?;
    if row >= ws.n_sensors() {
        return Err(LearningError::Dimension(format!(
            "row {row} out of range for {} sensors",
            ws.n_sensors()
        )));
    }
    let layout = RowLayout::new(ws, row, true);
    let mut lp = LinearProgram::new(layout.residual_mass_coeffs());
    layout.add_fit_rows(&mut lp, &ws.w, row)?;
    lp.add_constraint(layout.weight_mass_coeffs(), Relation::Le, eps)?;
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(LpError::Infeasible(r)) => {
            return Err(LearningError::Internal(format!(
                "row {row} program reported infeasible (residual {r:e}) although zero weights are feasible"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let (b, p) = layout.decode(&sol.x, ws.n_sensors());
    let residual = row_residual(ws, row, &b, &p);
    Ok(RowSolution { b, p, residual })
}

fn assemble(ws: &LearningSpec, rows: &[RowSolution]) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, k) = (ws.n_sensors(), ws.n_anchors());
    let b = DenseMatrix::from_fn(m, k, |i, c| rows[i].b[c])?;
    let p = DenseMatrix::from_fn(m, m, |i, j| rows[i].p[j])?;
    Ok((b, p))
}

/// `(f1, f2) = (||B + PW - W||_inf, ||P||_inf)`.
pub fn objectives(ws: &LearningSpec, b: &DenseMatrix, p: &DenseMatrix) -> Result<(f64, f64)> {
    let fit = b.add(&p.matmul(&ws.w)?)?.sub(&ws.w)?;
    Ok((induced_norm(&fit, NormKind::Infinity), induced_norm(p, NormKind::Infinity)))
}

/// One point of the accuracy/speed front.
#[derive(Debug, Clone, Serialize)]
pub struct ParetoPoint {
    /// Norm budget on `P`.
    pub eps: f64,
    /// `||B + PW - W||_inf` of the returned solution.
    pub delta: f64,
    #[serde(skip)]
    pub b: DenseMatrix,
    #[serde(skip)]
    pub p: DenseMatrix,
    /// `delta / (1 - eps)`
    pub utility: f64,
    pub norm_p: f64,
    pub spectral_radius: f64,
    /// The fit is exact and the budget is not binding, i.e. `eps` exceeds the
    /// smallest budget that admits an exact solution.
    pub beyond_exact: bool,
}

impl ParetoPoint {
    fn from_solution(ws: &LearningSpec, eps: f64, b: DenseMatrix, p: DenseMatrix) -> Result<Self> {
        let (delta, norm_p) = objectives(ws, &b, &p)?;
        let spectral_radius = spectral_radius(&p)?;
        Ok(Self {
            eps,
            delta,
            utility: delta / (1.0 - eps),
            norm_p,
            spectral_radius,
            beyond_exact: delta <= EXACT_RESIDUAL_TOL && eps - norm_p > 1e-6,
            b,
            p,
        })
    }

    /// Limit error `||(I - P)^{-1} B - W||_inf` actually realised.
    pub fn steady_state_error(&self, w: &DenseMatrix) -> Result<f64> {
        let lim = limit_map(&self.p, &self.b)?;
        Ok(induced_norm(&lim.sub(w)?, NormKind::Infinity))
    }
}

/// Budget-constrained problem: minimise `f1` subject to `f2 <= eps`.
pub fn p1(ws: &LearningSpec, eps: f64) -> Result<ParetoPoint> {
    check_eps(eps)?;
    let rows = (0..ws.n_sensors())
        .into_par_iter()
        .map(|i| solve_row(ws, i, eps))
        .collect::<Result<Vec<_>>>()?;
    let (b, p) = assemble(ws, &rows)?;
    ParetoPoint::from_solution(ws, eps, b, p)
}

/// Smallest norm budget that admits an exact fit, with the fitting weights.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// `+inf` when some row has no exact fit or the budget would be `>= 1`.
    pub eps_exact: f64,
    pub weights: Option<(DenseMatrix, DenseMatrix)>,
}

impl ExactSolution {
    pub fn is_finite(&self) -> bool {
        self.eps_exact.is_finite()
    }
}

/// Minimises `||P||_inf` subject to `B + PW = W` and the sparsity pattern.
pub fn p2_zero(ws: &LearningSpec) -> Result<ExactSolution> {
    let rows = (0..ws.n_sensors())
        .into_par_iter()
        .map(|i| {
            let layout = RowLayout::new(ws, i, false);
            let mut lp = LinearProgram::new(layout.weight_mass_coeffs());
            layout.add_fit_rows(&mut lp, &ws.w, i)?;
            match lp.solve() {
                Ok(sol) => {
                    let (b, p) = layout.decode(&sol.x, ws.n_sensors());
                    let residual = row_residual(ws, i, &b, &p);
                    Ok(Some(RowSolution { b, p, residual }))
                }
                Err(LpError::Infeasible(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<Option<RowSolution>>>>()?;
    let infinite = ExactSolution {
        eps_exact: f64::INFINITY,
        weights: None,
    };
    let Some(rows) = rows.into_iter().collect::<Option<Vec<_>>>() else {
        return Ok(infinite);
    };
    let (b, p) = assemble(ws, &rows)?;
    let eps_exact = induced_norm(&p, NormKind::Infinity);
    if eps_exact >= 1.0 {
        return Ok(infinite);
    }
    Ok(ExactSolution {
        eps_exact,
        weights: Some((b, p)),
    })
}

/// Residual-constrained problem: minimise `f2` subject to `f1 <= delta`.
/// Returns `+inf` when no sparsity-feasible weights meet the residual cap.
pub fn p2(ws: &LearningSpec, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(LearningError::Dimension(format!("residual cap must be >= 0, got {delta}")));
    }
    let minima = (0..ws.n_sensors())
        .into_par_iter()
        .map(|i| {
            let layout = RowLayout::new(ws, i, true);
            let mut lp = LinearProgram::new(layout.weight_mass_coeffs());
            layout.add_fit_rows(&mut lp, &ws.w, i)?;
            lp.add_constraint(layout.residual_mass_coeffs(), Relation::Le, delta)?;
            match lp.solve() {
                Ok(sol) => Ok(sol.objective.max(0.0)),
                Err(LpError::Infeasible(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(minima.into_iter().fold(0.0, f64::max))
}

/// `delta / (1 - eps)` for a front point.
pub fn utility(pt: &ParetoPoint) -> Result<f64> {
    if pt.eps >= 1.0 {
        return Err(LearningError::UndefinedUtility(pt.eps));
    }
    Ok(pt.delta / (1.0 - pt.eps))
}

/// Backward difference `(delta(1) - delta(1 - h)) / h` with `delta(1) = 0`,
/// negated: the slope magnitude of the front where it meets `(1, 0)`.
pub fn left_derivative_at_one(ws: &LearningSpec, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(LearningError::InvalidEps(1.0 - h));
    }
    Ok(p1(ws, 1.0 - h)?.delta / h)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoFront {
    /// Sorted by `eps`; only budgets up to `eps_exact` are kept.
    pub points: Vec<ParetoPoint>,
    pub eps_exact: f64,
    /// Infimum achievable utility: zero with an exact solution, otherwise the
    /// slope magnitude at `eps = 1` estimated from the finest budget.
    pub c_inf: f64,
}

impl ParetoFront {
    /// Smallest consecutive drop `delta_i - delta_{i+1}` among points below
    /// `eps_exact` (`+inf` with fewer than two such points).
    pub fn min_consecutive_drop(&self) -> f64 {
        let inner: Vec<&ParetoPoint> = self.points.iter().filter(|p| p.eps < self.eps_exact).collect();
        inner
            .windows(2)
            .map(|w| w[0].delta - w[1].delta)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest second divided difference scaled to a unit step, over
    /// consecutive triples (`+inf` with fewer than three points).
    pub fn min_second_difference(&self) -> f64 {
        self.points
            .windows(3)
            .map(|w| {
                let (a, b, c) = (&w[0], &w[1], &w[2]);
                let left = (b.delta - a.delta) / (b.eps - a.eps);
                let right = (c.delta - b.delta) / (c.eps - b.eps);
                // chord form keeps the check meaningful on uneven grids
                (right - left) * (b.eps - a.eps).min(c.eps - b.eps)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest increase `u_{i+1} - u_i` of the utility along the front.
    pub fn max_utility_increase(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1].utility - w[0].utility)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `eps,delta,utility,spectral_radius`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "eps,delta,utility,spectral_radius")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p.eps, p.delta, p.utility, p.spectral_radius
            )?;
        }
        Ok(())
    }
}

/// Solves the budget problem across the grid, keeping only budgets up to the
/// smallest exact budget and appending the exact point itself.
pub fn pareto_front(ws: &LearningSpec) -> Result<ParetoFront> {
    let exact = p2_zero(ws)?;
    let mut grid: Vec<f64> = ws
        .eps_grid
        .iter()
        .copied()
        .filter(|&e| e < exact.eps_exact)
        .collect();
    if ws.refine_near_one && !exact.is_finite() {
        for k in REFINEMENT_EXPONENTS {
            let e = 1.0 - 10f64.powi(-k);
            if grid.last().is_none_or(|&last| e > last) {
                grid.push(e);
            }
        }
    }
    let mut points = grid
        .par_iter()
        .map(|&e| p1(ws, e))
        .collect::<Result<Vec<_>>>()?;
    if let Some((b, p)) = exact.weights.clone() {
        points.push(ParetoPoint::from_solution(ws, exact.eps_exact, b, p)?);
    }
    let c_inf = if exact.is_finite() {
        0.0
    } else {
        match points.last() {
            Some(last) if last.eps >= 1.0 - 10f64.powi(-REFINEMENT_EXPONENTS[1]) - 1e-15 => {
                last.delta / (1.0 - last.eps)
            }
            _ => left_derivative_at_one(ws, 10f64.powi(-REFINEMENT_EXPONENTS[1]))?,
        }
    };
    Ok(ParetoFront {
        points,
        eps_exact: exact.eps_exact,
        c_inf,
    })
}

/// Line through the operating point and `(1, 0)`: cost `c` gives
/// `delta = c (1 - eps)`, so `slope = -c` and `intercept = c`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CostLine {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffResult {
    pub operating_eps: f64,
    pub operating_cost: f64,
    #[serde(skip)]
    pub b: DenseMatrix,
    #[serde(skip)]
    pub p: DenseMatrix,
    /// Utility bound on the limit error.
    pub e_ss_bound: f64,
    /// `||(I - P)^{-1} B - W||_inf`
    pub e_ss_actual: f64,
    pub spectral_radius: f64,
    pub cost_line: CostLine,
}

fn tradeoff_from_point(pt: &ParetoPoint, w: &DenseMatrix) -> Result<TradeoffResult> {
    let cost = utility(pt)?;
    Ok(TradeoffResult {
        operating_eps: pt.eps,
        operating_cost: cost,
        e_ss_bound: cost,
        e_ss_actual: pt.steady_state_error(w)?,
        spectral_radius: pt.spectral_radius,
        cost_line: CostLine {
            slope: -cost,
            intercept: cost,
        },
        b: pt.b.clone(),
        p: pt.p.clone(),
    })
}

/// Fastest operating point whose utility does not exceed `c_o`: the smallest
/// front budget with `u <= c_o`, found by bisection on the nonincreasing
/// utilities.
pub fn tradeoff_fixed_cost(ws: &LearningSpec, front: &ParetoFront, c_o: f64) -> Result<TradeoffResult> {
    let unachievable = LearningError::UnachievableCost {
        c_o,
        c_inf: front.c_inf,
    };
    let attained = front.eps_exact.is_finite();
    if c_o.is_nan() || c_o < front.c_inf || (!attained && c_o <= front.c_inf) {
        return Err(unachievable);
    }
    let slack = 1e-12 * (1.0 + c_o.abs());
    let idx = front.points.partition_point(|p| p.utility > c_o + slack);
    match front.points.get(idx) {
        Some(pt) => tradeoff_from_point(pt, ws.target()),
        None => Err(unachievable),
    }
}

/// Cheapest operating point no slower than budget `eps_a`: the front point at
/// `min(eps_a, eps_exact)`.
pub fn tradeoff_fixed_speed(ws: &LearningSpec, front: &ParetoFront, eps_a: f64) -> Result<TradeoffResult> {
    check_eps(eps_a)?;
    let eps = eps_a.min(front.eps_exact);
    if let Some(pt) = front.points.iter().find(|p| p.eps == eps) {
        return tradeoff_from_point(pt, ws.target());
    }
    tradeoff_from_point(&p1(ws, eps)?, ws.target())
}

/// Rank test that every exact fit `(I - P)^{-1} B = W` must pass.
pub fn check_exact_necessary(b: &DenseMatrix, w: &DenseMatrix) -> Result<bool> {
    if b.shape() != w.shape() {
        return Err(LearningError::Dimension(format!(
            "B is {:?}, W is {:?}",
            b.shape(),
            w.shape()
        )));
    }
    Ok(numerical_rank(b, DEFAULT_RANK_TOL) == numerical_rank(w, DEFAULT_RANK_TOL))
}

/// Points scanned below `eps` by [`verify_learning_optimum_is_pareto`].
pub const VERIFY_SCAN_POINTS: usize = 40;

/// Minimises the utility directly over budgets `eps' <= eps` on a fine grid
/// and checks that the minimiser is the front point at `eps`, and that no
/// smaller budget reaches the same residual.
pub fn verify_learning_optimum_is_pareto(ws: &LearningSpec, eps: f64) -> Result<bool> {
    check_eps(eps)?;
    let target = p1(ws, eps)?;
    if eps == 0.0 {
        return Ok(true);
    }
    let scan = (0..=VERIFY_SCAN_POINTS)
        .into_par_iter()
        .map(|j| {
            let e = eps * j as f64 / VERIFY_SCAN_POINTS as f64;
            p1(ws, e).map(|pt| (e, pt.delta, pt.utility))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scan.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let tie = 1e-9 * (1.0 + best);
    let (e_best, d_best, _) = *scan
        .iter()
        .rev()
        .find(|s| s.2 <= best + tie)
        .expect("scan is nonempty");
    if (e_best - eps).abs() > 1e-6 || (d_best - target.delta).abs() > 1e-6 {
        return Ok(false);
    }
    if target.delta <= EXACT_RESIDUAL_TOL {
        return Ok(true);
    }
    let min_budget = p2(ws, target.delta)?;
    Ok((min_budget - eps).abs() <= 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    /// Two anchors, two sensors; sensor 2 hears anchor 0, sensor 3 hears
    /// anchor 1, and sensor 2 also hears sensor 3.
    fn crossed() -> LearningSpec {
        let g = NetworkGraph::new(4, 2, &[(2, 0), (3, 1), (2, 3)]).unwrap();
        LearningSpec::new(Arc::new(g), mat(&[&[0.5, 0.5], &[0.2, 0.8]])).unwrap()
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], 0.0);
        assert!((g[63] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let ws = crossed();
        assert!(ws.clone().with_grid(vec![]).is_err());
        assert!(ws.clone().with_grid(vec![0.1, 0.1]).is_err());
        assert!(ws.clone().with_grid(vec![0.5, 1.0]).is_err());
        assert!(ws.clone().with_grid(vec![0.0, 0.5]).is_ok());
        assert!(matches!(ws.with_norm(NormKind::One), Err(LearningError::UnsupportedNorm)));
    }

    #[test]
    fn zero_budget_residual_is_forbidden_mass() {
        let ws = crossed();
        let r0 = solve_row(&ws, 0, 0.0).unwrap();
        assert!((r0.residual - 0.5).abs() < 1e-12);
        assert!(r0.p.iter().all(|&v| v == 0.0));
        let r1 = solve_row(&ws, 1, 0.0).unwrap();
        assert!((r1.residual - 0.2).abs() < 1e-12);
    }

    #[test]
    fn dense_row_fits_exactly() {
        let edges: Vec<_> = (0..4).flat_map(|l| (0..4).map(move |j| (l, j))).collect();
        let g = NetworkGraph::new(4, 2, &edges).unwrap();
        let w = mat(&[&[0.3, -1.2], &[2.0, 0.1]]);
        let ws = LearningSpec::new(Arc::new(g), w.clone()).unwrap();
        let r = solve_row(&ws, 1, 0.4).unwrap();
        assert!(r.residual < 1e-12);
        assert_eq!(r.b, w.row(1));
        assert!(r.p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn budget_binds_on_inexact_rows() {
        let ws = crossed();
        for eps in [0.1, 0.3, 0.7] {
            let pt = p1(&ws, eps).unwrap();
            assert!((pt.norm_p - eps).abs() < 1e-9, "eps {eps}: {}", pt.norm_p);
            assert!(pt.delta > 0.0);
            assert!(!pt.beyond_exact);
        }
    }

    #[test]
    fn invalid_budget() {
        let ws = crossed();
        assert!(matches!(p1(&ws, 1.0), Err(LearningError::InvalidEps(_))));
        assert!(matches!(solve_row(&ws, 0, -0.1), Err(LearningError::InvalidEps(_))));
        assert!(matches!(solve_row(&ws, 5, 0.1), Err(LearningError::Dimension(_))));
    }

    #[test]
    fn exact_by_anchors_alone() {
        let g = NetworkGraph::new(4, 2, &[(2, 0), (2, 1), (3, 0)]).unwrap();
        let ws = LearningSpec::new(Arc::new(g), mat(&[&[0.5, 0.5], &[1.0, 0.0]])).unwrap();
        let ex = p2_zero(&ws).unwrap();
        assert_eq!(ex.eps_exact, 0.0);
        let front = pareto_front(&ws).unwrap();
        assert_eq!(front.points.len(), 1);
        assert_eq!(front.points[0].eps, 0.0);
        assert!(front.points[0].delta < 1e-14);
        assert_eq!(front.c_inf, 0.0);
    }

    #[test]
    fn exact_infeasible_without_help() {
        // sensor 2 needs anchor 1 but hears nobody
        let g = NetworkGraph::new(3, 2, &[(2, 0)]).unwrap();
        let ws = LearningSpec::new(Arc::new(g), mat(&[&[0.5, 0.5]])).unwrap();
        assert!(p2_zero(&ws).unwrap().eps_exact.is_infinite());
    }

    #[test]
    fn exact_through_a_relay() {
        // sensor 3 copies sensor 2, which fits its row from anchors
        let g = NetworkGraph::new(4, 2, &[(2, 0), (2, 1), (3, 2)]).unwrap();
        let ws = LearningSpec::new(Arc::new(g), mat(&[&[0.25, 0.25], &[0.125, 0.125]])).unwrap();
        let ex = p2_zero(&ws).unwrap();
        assert!((ex.eps_exact - 0.5).abs() < 1e-12);
        let (b, p) = ex.weights.unwrap();
        assert!(check_exact_necessary(&b, &ws.w).unwrap());
        assert!(limit_map(&p, &b).unwrap().sub(&ws.w).unwrap().max_abs() < 1e-12);
        let front = pareto_front(&ws).unwrap();
        assert_eq!(front.c_inf, 0.0);
        assert!(front.points.iter().all(|p| p.eps <= 0.5));
        assert_eq!(front.points.last().unwrap().eps, ex.eps_exact);
    }

    #[test]
    fn front_shape_without_exact_solution() {
        let ws = crossed();
        let front = pareto_front(&ws).unwrap();
        assert!(front.eps_exact.is_infinite());
        assert_eq!(front.points.len(), 66);
        assert!(front.min_consecutive_drop() > 1e-9);
        assert!(front.min_second_difference() >= -1e-8);
        assert!(front.max_utility_increase() <= 1e-12);
        assert!(front.c_inf > 0.0);
    }

    #[test]
    fn endpoint_identity_fits() {
        let ws = crossed();
        let (f1, f2) = objectives(&ws, &DenseMatrix::zeros(2, 2), &DenseMatrix::identity(2)).unwrap();
        assert_eq!((f1, f2), (0.0, 1.0));
    }

    #[test]
    fn utility_cases() {
        let ws = crossed();
        let mut pt = p1(&ws, 0.0).unwrap();
        assert_eq!(utility(&pt).unwrap(), pt.delta);
        pt.eps = 1.0;
        assert!(matches!(utility(&pt), Err(LearningError::UndefinedUtility(_))));
    }

    #[test]
    fn fixed_cost_queries() {
        let ws = crossed();
        let front = pareto_front(&ws).unwrap();
        let loose = tradeoff_fixed_cost(&ws, &front, front.points[0].utility + 1.0).unwrap();
        assert_eq!(loose.operating_eps, 0.0);
        let err = tradeoff_fixed_cost(&ws, &front, front.c_inf * 0.5).unwrap_err();
        assert!(matches!(err, LearningError::UnachievableCost { .. }));
        assert!(tradeoff_fixed_cost(&ws, &front, front.c_inf).is_err());
        let mid = 0.5 * (front.points[0].utility + front.c_inf);
        let r = tradeoff_fixed_cost(&ws, &front, mid).unwrap();
        let scan = front.points.iter().find(|p| p.utility <= mid).unwrap();
        assert_eq!(r.operating_eps, scan.eps);
        assert!(r.e_ss_actual <= r.e_ss_bound + 1e-8);
        assert_eq!(r.cost_line.intercept, -r.cost_line.slope);
    }

    #[test]
    fn fixed_speed_queries() {
        let ws = crossed();
        let front = pareto_front(&ws).unwrap();
        let r0 = tradeoff_fixed_speed(&ws, &front, 0.0).unwrap();
        assert_eq!(r0.p, DenseMatrix::zeros(2, 2));
        assert_eq!(r0.operating_cost, front.points[0].delta);
        let off_grid = tradeoff_fixed_speed(&ws, &front, 0.123).unwrap();
        assert!(off_grid.e_ss_actual <= off_grid.e_ss_bound + 1e-8);
        assert!(tradeoff_fixed_speed(&ws, &front, 1.0).is_err());
    }

    #[test]
    fn fixed_cost_zero_in_exact_case() {
        let g = NetworkGraph::new(4, 2, &[(2, 0), (2, 1), (3, 2)]).unwrap();
        let ws = LearningSpec::new(Arc::new(g), mat(&[&[0.25, 0.25], &[0.125, 0.125]])).unwrap();
        let front = pareto_front(&ws).unwrap();
        let r = tradeoff_fixed_cost(&ws, &front, 0.0).unwrap();
        assert_eq!(r.operating_eps, front.eps_exact);
        assert!(r.e_ss_actual < 1e-10);
        let s = tradeoff_fixed_speed(&ws, &front, 0.9).unwrap();
        assert_eq!(s.operating_eps, front.eps_exact);
        assert!(s.operating_cost < 1e-10);
    }

    #[test]
    fn rank_condition() {
        let w = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(check_exact_necessary(&w, &w).unwrap());
        assert!(!check_exact_necessary(&DenseMatrix::zeros(2, 2), &w).unwrap());
        assert!(check_exact_necessary(&DenseMatrix::zeros(1, 2), &w).is_err());
    }

    #[test]
    fn front_point_is_direct_optimum() {
        let ws = crossed();
        for eps in [0.0, 0.2, 0.6] {
            assert!(verify_learning_optimum_is_pareto(&ws, eps).unwrap());
        }
    }

    #[test]
    fn residual_cap_inverts_budget() {
        let ws = crossed();
        let pt = p1(&ws, 0.4).unwrap();
        assert!((p2(&ws, pt.delta).unwrap() - 0.4).abs() < 1e-9);
        assert_eq!(p2(&ws, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn front_csv_header() {
        let ws = crossed().with_grid(vec![0.0, 0.5]).unwrap();
        let front = pareto_front(&ws).unwrap();
        let mut buf = Vec::new();
        front.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eps,delta,utility,spectral_radius\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
