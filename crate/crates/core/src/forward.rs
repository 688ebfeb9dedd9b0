//! Forward problem: iterate the anchored linear protocol
//! `X(t+1) = P X(t) + B U(0)`, certify convergence, measure the decay rate and
//! build systems for the classical special cases.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, NetworkGraph};
use crate::linalg::{
    induced_norm, limit_map, numerical_rank, spectral_radius, DenseMatrix, LinalgError, NormKind,
    DEFAULT_RANK_TOL,
};

/// Snapshots are kept for every step up to this iteration, then every
/// [`THIN_FACTOR`]-th step.
pub const FULL_HISTORY_STEPS: usize = 10_000;
pub const THIN_FACTOR: usize = 10;

/// Successive differences at or below this many ulps of the state are treated
/// as stagnation at roundoff.
pub const ROUNDOFF_STEP_ULPS: f64 = 16.0;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("divergent system: spectral radius {radius} >= 1")]
    Divergent { radius: f64 },
    #[error("no convergence within {} iterations", .trajectory.iterations)]
    MaxIters { trajectory: Box<Trajectory> },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("need at least 10 error norms above the roundoff floor, have {0}")]
    TrajectoryTooShort(usize),
    #[error("trajectory has no reference limit, so no error norms")]
    NoReference,
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("weights [B|P] use links missing from the graph")]
    SparsityViolation,
    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),
    #[error("row {row} of [B|P] is not stochastic: {reason}")]
    NotRowStochastic { row: usize, reason: String },
    #[error("step-size exponent must lie in (0.5, 1], got {0}")]
    GammaOutOfRange(f64),
    #[error("noise standard deviation must be finite and >= 0, got {0}")]
    InvalidNoise(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, ForwardError>;

/// The weight pair `(B, P)` on a fixed network.
#[derive(Debug, Clone)]
pub struct IterationSystem {
    b: DenseMatrix,
    p: DenseMatrix,
    graph: Arc<NetworkGraph>,
    spectral_radius: f64,
}

impl IterationSystem {
    /// Checks shapes (`B` is `M x K`, `P` is `M x M`) and that `[B | P]` respects
    /// the graph sparsity.
    pub fn new(graph: Arc<NetworkGraph>, b: DenseMatrix, p: DenseMatrix) -> Result<Self> {
        let (k, m) = (graph.n_anchors(), graph.n_sensors());
        if b.shape() != (m, k) || p.shape() != (m, m) {
            return Err(ForwardError::Dimension(format!(
                "expected B {m}x{k} and P {m}x{m}, got B {:?} and P {:?}",
                b.shape(),
                p.shape()
            )));
        }
        if !graph.associated_graph_respects(&b.hstack(&p)?)? {
            return Err(ForwardError::SparsityViolation);
        }
        let spectral_radius = spectral_radius(&p)?;
        Ok(Self {
            b,
            p,
            graph,
            spectral_radius,
        })
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn graph(&self) -> &Arc<NetworkGraph> {
        &self.graph
    }

    pub fn n_anchors(&self) -> usize {
        self.b.cols()
    }

    pub fn n_sensors(&self) -> usize {
        self.p.rows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_convergent(&self) -> bool {
        self.spectral_radius < 1.0
    }

    /// The full `N x N` iteration matrix `[[I, 0], [B, P]]`.
    pub fn upsilon(&self) -> DenseMatrix {
        let (k, m) = (self.n_anchors(), self.n_sensors());
        let n = k + m;
        DenseMatrix::from_fn(n, n, |r, c| match (r < k, c < k) {
            (true, true) => {
                if r == c {
                    1.0
                } else {
                    0.0
                }
            }
            (true, false) => 0.0,
            (false, true) => self.b[(r - k, c)],
            (false, false) => self.p[(r - k, c - k)],
        })
        .expect("entries copied from finite matrices")
    }

    /// `(I - P)^{-1} B`.
    pub fn limit_map(&self) -> Result<DenseMatrix> {
        if !self.is_convergent() {
            return Err(ForwardError::Divergent {
                radius: self.spectral_radius,
            });
        }
        Ok(limit_map(&self.p, &self.b)?)
    }

    fn check_states(&self, u: &DenseMatrix, x: &DenseMatrix) -> Result<()> {
        if u.rows() != self.n_anchors() || x.rows() != self.n_sensors() || u.cols() != x.cols() {
            return Err(ForwardError::Dimension(format!(
                "states U {:?} and X {:?} do not fit K={}, M={}",
                u.shape(),
                x.shape(),
                self.n_anchors(),
                self.n_sensors()
            )));
        }
        Ok(())
    }
}

/// Anchor states `U` (`K x m`) and sensor states `X` (`M x m`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub u: DenseMatrix,
    pub x: DenseMatrix,
}

impl StateMatrix {
    pub fn new(u: DenseMatrix, x: DenseMatrix) -> Result<Self> {
        if u.cols() != x.cols() {
            return Err(ForwardError::Dimension(format!(
                "U has width {}, X has width {}",
                u.cols(),
                x.cols()
            )));
        }
        Ok(Self { u, x })
    }

    pub fn width(&self) -> usize {
        self.x.cols()
    }
}

/// One synchronous update in matrix form; anchors are carried unchanged.
pub fn step(sys: &IterationSystem, s: &StateMatrix) -> Result<StateMatrix> {
    sys.check_states(&s.u, &s.x)?;
    let x = sys.p.matmul(&s.x)?.add(&sys.b.matmul(&s.u)?)?;
    Ok(StateMatrix { u: s.u.clone(), x })
}

/// The same update written node by node: each sensor combines the states of
/// its sensor neighbours and anchor neighbours with its own weights.
pub fn step_nodewise(sys: &IterationSystem, s: &StateMatrix) -> Result<StateMatrix> {
    sys.check_states(&s.u, &s.x)?;
    let g = &sys.graph;
    let k = g.n_anchors();
    let width = s.width();
    let mut x = DenseMatrix::zeros(sys.n_sensors(), width);
    for i in 0..sys.n_sensors() {
        let nb = g.neighborhoods(k + i)?;
        for c in 0..width {
            let own = sys.p[(i, i)] * s.x[(i, c)];
            let from_sensors: f64 = nb
                .sensors
                .iter()
                .filter(|&&j| j != k + i)
                .map(|&j| sys.p[(i, j - k)] * s.x[(j - k, c)])
                .sum();
            let from_anchors: f64 = nb.anchors.iter().map(|&a| sys.b[(i, a)] * s.u[(a, c)]).sum();
            x[(i, c)] = own + from_sensors + from_anchors;
        }
    }
    Ok(StateMatrix { u: s.u.clone(), x })
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// `(t, X(t))`, every step up to [`FULL_HISTORY_STEPS`] then thinned.
    #[serde(skip)]
    pub snapshots: Vec<(usize, DenseMatrix)>,
    /// `||X(t) - X_inf||_inf` indexed by `t`, empty when no limit is known.
    pub error_norms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Bound on the distance of the final state to the limit derived from the
    /// last successive difference, available when `||P||_inf < 1`.
    pub certified_error_bound: Option<f64>,
    /// Magnitude of the reference limit, used to place the roundoff floor.
    pub reference_scale: f64,
}

impl Trajectory {
    fn new(x0: &DenseMatrix, reference: Option<&DenseMatrix>) -> Self {
        let mut error_norms = Vec::new();
        let mut reference_scale = 1.0f64.max(induced_norm(x0, NormKind::Infinity));
        if let Some(r) = reference {
            error_norms.push(induced_norm(&x0.sub(r).expect("shapes checked"), NormKind::Infinity));
            reference_scale = reference_scale.max(induced_norm(r, NormKind::Infinity));
        }
        Self {
            snapshots: vec![(0, x0.clone())],
            error_norms,
            iterations: 0,
            converged: false,
            certified_error_bound: None,
            reference_scale,
        }
    }

    fn record(&mut self, t: usize, x: &DenseMatrix, reference: Option<&DenseMatrix>) {
        if t <= FULL_HISTORY_STEPS || t.is_multiple_of(THIN_FACTOR) {
            self.snapshots.push((t, x.clone()));
        }
        if let Some(r) = reference {
            self.error_norms
                .push(induced_norm(&x.sub(r).expect("shapes checked"), NormKind::Infinity));
        }
        self.iterations = t;
    }

    fn seal(&mut self, x: &DenseMatrix) {
        if self.snapshots.last().map(|s| s.0) != Some(self.iterations) {
            self.snapshots.push((self.iterations, x.clone()));
        }
    }

    pub fn final_state(&self) -> &DenseMatrix {
        &self.snapshots.last().expect("trajectory holds X(0)").1
    }

    /// CSV with a leading `# {json}` comment, then `t, x<i>_<c>..., error_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W, config: &serde_json::Value) -> std::io::Result<()> {
        writeln!(out, "# {config}")?;
        let (m, width) = self.final_state().shape();
        let mut header = vec!["t".to_string()];
        for i in 0..m {
            for c in 0..width {
                header.push(format!("x{}_{}", i + 1, c + 1));
            }
        }
        header.push("error_norm".to_string());
        writeln!(out, "{}", header.join(","))?;
        for (t, x) in &self.snapshots {
            let mut line = vec![t.to_string()];
            line.extend(x.as_slice().iter().map(|v| format!("{v:.16e}")));
            line.push(self.error_norms.get(*t).map_or(String::new(), |e| format!("{e:.16e}")));
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Runs the iteration without checking `rho(P) < 1`. When `||P||_inf < 1` it
/// stops once the certified distance to the limit,
/// `||P|| / (1 - ||P||) * ||X(t+1) - X(t)||_inf`, is at most `tol`; otherwise
/// once the successive difference itself is. It also stops when the difference
/// falls to roundoff level, `ROUNDOFF_STEP_ULPS * eps * max(1, ||X||_inf)`,
/// since no later step can be resolved; the reported bound may then exceed
/// `tol`. Meant for marginally stable systems such as average consensus; use
/// [`run`] otherwise.
pub fn iterate(
    sys: &IterationSystem,
    u0: &DenseMatrix,
    x0: &DenseMatrix,
    tol: f64,
    max_iters: usize,
    reference: Option<&DenseMatrix>,
) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(ForwardError::InvalidTolerance(tol));
    }
    sys.check_states(u0, x0)?;
    if let Some(r) = reference {
        if r.shape() != x0.shape() {
            return Err(ForwardError::Dimension("reference limit shape differs from X(0)".into()));
        }
    }
    let drive = sys.b.matmul(u0)?;
    let p_norm = induced_norm(&sys.p, NormKind::Infinity);
    let mut traj = Trajectory::new(x0, reference);
    let mut x = x0.clone();
    for t in 1..=max_iters {
        let next = sys.p.matmul(&x)?.add(&drive)?;
        let diff = induced_norm(&next.sub(&x)?, NormKind::Infinity);
        x = next;
        traj.record(t, &x, reference);
        let certified = (p_norm < 1.0).then(|| diff * p_norm / (1.0 - p_norm));
        let roundoff = ROUNDOFF_STEP_ULPS * f64::EPSILON * x.max_abs().max(1.0);
        if certified.unwrap_or(diff) <= tol || diff <= roundoff {
            traj.converged = true;
            traj.certified_error_bound = certified;
            break;
        }
    }
    traj.seal(&x);
    if !traj.converged {
        return Err(ForwardError::MaxIters {
            trajectory: Box::new(traj),
        });
    }
    Ok(traj)
}

/// Iterates a convergent system to tolerance, recording the error against the
/// exact limit `(I - P)^{-1} B U(0)`.
pub fn run(
    sys: &IterationSystem,
    u0: &DenseMatrix,
    x0: &DenseMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<Trajectory> {
    if !sys.is_convergent() {
        return Err(ForwardError::Divergent {
            radius: sys.spectral_radius,
        });
    }
    sys.check_states(u0, x0)?;
    let limit = sys.limit_map()?.matmul(u0)?;
    iterate(sys, u0, x0, tol, max_iters, Some(&limit))
}

/// Least-squares slope of `ln ||E(t)||` against `t` over the second half of
/// the trajectory. Norms that have reached the roundoff floor are dropped
/// first. Returns `-inf` when the error hits exactly zero.
pub fn decay_exponent(traj: &Trajectory) -> Result<f64> {
    if traj.error_norms.is_empty() {
        return Err(ForwardError::NoReference);
    }
    if traj.error_norms.contains(&0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let floor = 1e-11 * traj.reference_scale;
    let usable = traj
        .error_norms
        .iter()
        .position(|&e| e <= floor)
        .unwrap_or(traj.error_norms.len());
    if usable < 10 {
        return Err(ForwardError::TrajectoryTooShort(usable));
    }
    let start = usable / 2;
    let pts: Vec<(f64, f64)> = (start..usable)
        .map(|t| (t as f64, traj.error_norms[t].ln()))
        .collect();
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mean_t) * (y - mean_y)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Dimension of the reachable set of limits for state width `m`, and the
/// width-normalised dimension `rank(B)`.
pub fn consensus_dimension(sys: &IterationSystem, m: usize) -> Result<(usize, usize)> {
    if sys.n_anchors() >= sys.n_sensors() {
        return Err(ForwardError::Hypothesis(format!(
            "need K < M, have K={} and M={}",
            sys.n_anchors(),
            sys.n_sensors()
        )));
    }
    if !sys.is_convergent() {
        return Err(ForwardError::Hypothesis(format!(
            "need rho(P) < 1, have {}",
            sys.spectral_radius
        )));
    }
    let rank = numerical_rank(&sys.b, DEFAULT_RANK_TOL);
    Ok((m * rank, rank))
}

/// Metropolis-Hastings weights on the bidirectional links of an anchor-free
/// network. The result is symmetric and doubly stochastic with `B` empty.
pub fn average_consensus_preset(graph: Arc<NetworkGraph>) -> Result<IterationSystem> {
    if graph.n_anchors() != 0 {
        return Err(ForwardError::Hypothesis(format!(
            "average consensus needs a sensor-only network, found {} anchors",
            graph.n_anchors()
        )));
    }
    let m = graph.n_sensors();
    let linked = |i: usize, j: usize| i != j && graph.adjacent(i, j) && graph.adjacent(j, i);
    let degree: Vec<usize> = (0..m).map(|i| (0..m).filter(|&j| linked(i, j)).count()).collect();
    if !graph.sensors_bidirectionally_connected() {
        log::warn!("network is not connected over bidirectional links; the limit will not be the global mean");
    }
    let mut p = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let mut off = 0.0;
        for j in 0..m {
            if linked(i, j) {
                let w = 1.0 / (1.0 + degree[i].max(degree[j]) as f64);
                p[(i, j)] = w;
                off += w;
            }
        }
        p[(i, i)] = 1.0 - off;
    }
    IterationSystem::new(graph, DenseMatrix::zeros(m, 0), p)
}

/// Jacobi splitting of `a_sys x = rhs_coupling u`: `P = I - D^{-1} A`,
/// `B = D^{-1} C`, so the limit solves the linear system.
pub fn jacobi_preset(
    a_sys: &DenseMatrix,
    rhs_coupling: &DenseMatrix,
    graph: Arc<NetworkGraph>,
) -> Result<IterationSystem> {
    let m = a_sys.rows();
    if !a_sys.is_square() || rhs_coupling.rows() != m {
        return Err(ForwardError::Dimension(format!(
            "system matrix {:?} and coupling {:?}",
            a_sys.shape(),
            rhs_coupling.shape()
        )));
    }
    if let Some(i) = (0..m).find(|&i| a_sys[(i, i)] == 0.0) {
        return Err(ForwardError::ZeroDiagonal(i));
    }
    let p = DenseMatrix::from_fn(m, m, |i, j| {
        let v = -a_sys[(i, j)] / a_sys[(i, i)];
        if i == j {
            0.0
        } else {
            v
        }
    })?;
    let b = DenseMatrix::from_fn(m, rhs_coupling.cols(), |i, k| rhs_coupling[(i, k)] / a_sys[(i, i)])?;
    let sys = IterationSystem::new(graph, b, p)?;
    if !sys.is_convergent() {
        return Err(ForwardError::Divergent {
            radius: sys.spectral_radius,
        });
    }
    Ok(sys)
}

/// Weights for the single-anchor leader-follower preset.
#[derive(Debug, Clone)]
pub enum LeaderWeights {
    /// Equal weight on every in-neighbour, self included.
    Uniform,
    /// Explicit nonnegative row-stochastic `[B | P]` (`M x N`).
    Custom(DenseMatrix),
}

/// Row-stochastic weights with one anchor; when every sensor is reachable from
/// the anchor all sensors converge to the anchor state.
pub fn leader_follower_preset(graph: Arc<NetworkGraph>, weights: LeaderWeights) -> Result<IterationSystem> {
    if graph.n_anchors() != 1 {
        return Err(ForwardError::Hypothesis(format!(
            "leader-follower needs exactly one anchor, found {}",
            graph.n_anchors()
        )));
    }
    let (m, n) = (graph.n_sensors(), graph.n_total());
    let f = match weights {
        LeaderWeights::Uniform => DenseMatrix::from_fn(m, n, |i, j| {
            let l = 1 + i;
            if graph.adjacent(l, j) {
                let deg = (0..n).filter(|&c| graph.adjacent(l, c)).count();
                1.0 / deg as f64
            } else {
                0.0
            }
        })?,
        LeaderWeights::Custom(f) => {
            if f.shape() != (m, n) {
                return Err(ForwardError::Dimension(format!("[B|P] must be {m}x{n}, got {:?}", f.shape())));
            }
            for i in 0..m {
                if f.row(i).iter().any(|&v| v < 0.0) {
                    return Err(ForwardError::NotRowStochastic {
                        row: i,
                        reason: "negative weight".into(),
                    });
                }
                let s: f64 = f.row(i).iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(ForwardError::NotRowStochastic {
                        row: i,
                        reason: format!("weights sum to {s}"),
                    });
                }
            }
            f
        }
    };
    let b = f.columns(0, 1);
    let p = f.columns(1, n);
    let sys = IterationSystem::new(graph, b, p)?;
    if sys.spectral_radius >= 1.0 - 1e-12 {
        return Err(ForwardError::Divergent {
            radius: sys.spectral_radius,
        });
    }
    Ok(sys)
}

/// Damped stochastic-approximation variant for noisy links:
/// `x(t+1) = x(t) + a_t (P x(t) + B u0 - x(t) + noise_t)` with
/// `a_t = (t+1)^-gamma` and i.i.d. Gaussian noise from a seeded stream.
#[allow(clippy::too_many_arguments)]
pub fn robust_run(
    sys: &IterationSystem,
    u0: &DenseMatrix,
    x0: &DenseMatrix,
    noise_std: f64,
    gamma: f64,
    iters: usize,
    seed: u64,
) -> Result<Trajectory> {
    if !(gamma > 0.5 && gamma <= 1.0) {
        return Err(ForwardError::GammaOutOfRange(gamma));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(ForwardError::InvalidNoise(noise_std));
    }
    if !sys.is_convergent() {
        return Err(ForwardError::Divergent {
            radius: sys.spectral_radius,
        });
    }
    sys.check_states(u0, x0)?;
    let limit = sys.limit_map()?.matmul(u0)?;
    let drive = sys.b.matmul(u0)?;
    let normal = Normal::new(0.0, noise_std).map_err(|_| ForwardError::InvalidNoise(noise_std))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = Trajectory::new(x0, Some(&limit));
    let mut x = x0.clone();
    let (m, width) = x.shape();
    for t in 0..iters {
        let alpha = ((t + 1) as f64).powf(-gamma);
        let target = sys.p.matmul(&x)?.add(&drive)?;
        for i in 0..m {
            for c in 0..width {
                let noise = if noise_std > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                let xi = x[(i, c)];
                x[(i, c)] = xi + alpha * (target[(i, c)] - xi + noise);
            }
        }
        traj.record(t + 1, &x, Some(&limit));
    }
    traj.converged = true;
    traj.seal(&x);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn scalar_system(b: f64, p: f64) -> IterationSystem {
        let g = Arc::new(NetworkGraph::new(2, 1, &[(1, 0)]).unwrap());
        IterationSystem::new(g, mat(&[&[b]]), mat(&[&[p]])).unwrap()
    }

    #[test]
    fn identity_p_zero_b_is_fixed_point() {
        let g = Arc::new(NetworkGraph::new(3, 1, &[(1, 0), (2, 0)]).unwrap());
        let sys = IterationSystem::new(g, DenseMatrix::zeros(2, 1), DenseMatrix::identity(2)).unwrap();
        let s = StateMatrix::new(mat(&[&[4.0, 1.0]]), mat(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        assert_eq!(step(&sys, &s).unwrap().x, s.x);
    }

    #[test]
    fn scalar_step() {
        let sys = scalar_system(0.5, 0.5);
        let s = StateMatrix::new(mat(&[&[2.0]]), mat(&[&[0.0]])).unwrap();
        let next = step(&sys, &s).unwrap();
        assert_eq!(next.x, mat(&[&[1.0]]));
        assert_eq!(next.u, s.u);
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let sys = scalar_system(0.5, 0.5);
        let s = StateMatrix::new(mat(&[&[2.0], &[1.0]]), mat(&[&[0.0]])).unwrap();
        assert!(matches!(step(&sys, &s), Err(ForwardError::Dimension(_))));
    }

    #[test]
    fn sparsity_enforced_on_construction() {
        let g = Arc::new(NetworkGraph::new(2, 1, &[]).unwrap());
        let r = IterationSystem::new(g, mat(&[&[0.5]]), mat(&[&[0.5]]));
        assert!(matches!(r, Err(ForwardError::SparsityViolation)));
    }

    #[test]
    fn one_shot_when_p_zero() {
        let g = Arc::new(NetworkGraph::new(4, 2, &[(2, 0), (2, 1), (3, 1)]).unwrap());
        let w = mat(&[&[0.3, -0.2], &[0.0, 1.5]]);
        let sys = IterationSystem::new(g, w.clone(), DenseMatrix::zeros(2, 2)).unwrap();
        let u0 = mat(&[&[1.0], &[2.0]]);
        let traj = run(&sys, &u0, &DenseMatrix::zeros(2, 1), 1e-12, 10).unwrap();
        assert_eq!(traj.final_state(), &w.matmul(&u0).unwrap());
        assert_eq!(traj.iterations, 1);
        assert_eq!(decay_exponent(&traj).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn stops_at_roundoff_when_certificate_is_loose() {
        // ||P||_inf ~ 0.9998 makes the certificate ~6e3 times the step size,
        // which cannot reach 1e-13 once steps sit at roundoff.
        use crate::instances::{random_matrix, random_network, random_system};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5940);
        let (m, k, w) = (rng.random_range(1..16), rng.random_range(1..4), rng.random_range(1..3));
        let r: f64 = rng.random_range(0.05..0.95);
        let g = Arc::new(random_network(&mut rng, m, k, 0.3, 0.5));
        let sys = random_system(&mut rng, g, r);
        let (u0, x0) = (random_matrix(&mut rng, k, w), random_matrix(&mut rng, m, w));
        assert!(induced_norm(sys.p(), NormKind::Infinity) > 0.999);
        let traj = run(&sys, &u0, &x0, 1e-13, 20_000).unwrap();
        assert!(traj.certified_error_bound.unwrap() > 1e-13);
        let limit = sys.limit_map().unwrap().matmul(&u0).unwrap();
        assert!(traj.final_state().sub(&limit).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn divergent_run_rejected() {
        let sys = scalar_system(0.1, 1.05);
        let r = run(&sys, &mat(&[&[1.0]]), &mat(&[&[0.0]]), 1e-9, 100);
        assert!(matches!(r, Err(ForwardError::Divergent { radius }) if (radius - 1.05).abs() < 1e-12));
    }

    #[test]
    fn max_iters_keeps_partial_trajectory() {
        let sys = scalar_system(0.01, 0.99);
        match run(&sys, &mat(&[&[1.0]]), &mat(&[&[0.0]]), 1e-12, 5) {
            Err(ForwardError::MaxIters { trajectory }) => {
                assert_eq!(trajectory.iterations, 5);
                assert_eq!(trajectory.snapshots.len(), 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scalar_decay_rate() {
        let sys = scalar_system(0.5, 0.5);
        let traj = run(&sys, &mat(&[&[1.0]]), &mat(&[&[7.0]]), 1e-12, 1000).unwrap();
        let slope = decay_exponent(&traj).unwrap();
        assert!((slope - 0.5f64.ln()).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn diagonal_decay_follows_dominant_mode() {
        let g = Arc::new(NetworkGraph::new(3, 1, &[(1, 0), (2, 0)]).unwrap());
        let sys = IterationSystem::new(g, mat(&[&[0.1], &[0.9]]), DenseMatrix::diagonal(&[0.9, 0.1]).unwrap()).unwrap();
        let traj = run(&sys, &mat(&[&[1.0]]), &mat(&[&[5.0], &[-3.0]]), 1e-13, 10_000).unwrap();
        let slope = decay_exponent(&traj).unwrap();
        assert!((slope - 0.9f64.ln()).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn decay_needs_enough_points() {
        let sys = scalar_system(0.5, 0.5);
        let traj = iterate(&sys, &mat(&[&[1.0]]), &mat(&[&[0.0]]), 1e-9, 100, None).unwrap();
        assert!(matches!(decay_exponent(&traj), Err(ForwardError::NoReference)));
        let short = run(&sys, &mat(&[&[1.0]]), &mat(&[&[0.0]]), 0.1, 100).unwrap();
        assert!(matches!(decay_exponent(&short), Err(ForwardError::TrajectoryTooShort(_))));
    }

    #[test]
    fn consensus_dimension_cases() {
        let edges: Vec<_> = (0..5).flat_map(|l| (0..5).map(move |j| (l, j))).collect();
        let g = Arc::new(NetworkGraph::new(5, 2, &edges).unwrap());
        let zero = IterationSystem::new(g.clone(), DenseMatrix::zeros(3, 2), DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(consensus_dimension(&zero, 2).unwrap(), (0, 0));
        let full = IterationSystem::new(
            g.clone(),
            mat(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]),
            DenseMatrix::identity(3).scale(0.2),
        )
        .unwrap();
        assert_eq!(consensus_dimension(&full, 3).unwrap(), (6, 2));
        let unstable = IterationSystem::new(g, DenseMatrix::zeros(3, 2), DenseMatrix::identity(3)).unwrap();
        assert!(matches!(consensus_dimension(&unstable, 1), Err(ForwardError::Hypothesis(_))));
        let square = Arc::new(NetworkGraph::new(4, 2, &[]).unwrap());
        let sys = IterationSystem::new(square, DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(consensus_dimension(&sys, 1), Err(ForwardError::Hypothesis(_))));
    }

    #[test]
    fn upsilon_block_layout() {
        let sys = scalar_system(0.25, 0.75);
        assert_eq!(sys.upsilon(), mat(&[&[1.0, 0.0], &[0.25, 0.75]]));
    }

    #[test]
    fn average_consensus_single_sensor() {
        let g = Arc::new(NetworkGraph::sensor_only(1, &[]).unwrap());
        let sys = average_consensus_preset(g).unwrap();
        assert_eq!(sys.p(), &mat(&[&[1.0]]));
        let x0 = mat(&[&[3.5]]);
        let traj = iterate(&sys, &DenseMatrix::zeros(0, 1), &x0, 1e-12, 10, None).unwrap();
        assert_eq!(traj.final_state(), &x0);
    }

    #[test]
    fn average_consensus_complete_graph() {
        let edges: Vec<_> = (0..4).flat_map(|l| (0..4).map(move |j| (l, j))).collect();
        let g = Arc::new(NetworkGraph::sensor_only(4, &edges).unwrap());
        let sys = average_consensus_preset(g).unwrap();
        let x0 = mat(&[&[1.0], &[2.0], &[-4.0], &[9.0]]);
        let traj = iterate(&sys, &DenseMatrix::zeros(0, 1), &x0, 1e-14, 1000, None).unwrap();
        for i in 0..4 {
            assert!((traj.final_state()[(i, 0)] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn average_consensus_rejects_anchors() {
        let g = Arc::new(NetworkGraph::new(3, 1, &[]).unwrap());
        assert!(matches!(average_consensus_preset(g), Err(ForwardError::Hypothesis(_))));
    }

    #[test]
    fn jacobi_identity_system() {
        let g = Arc::new(NetworkGraph::new(3, 1, &[(1, 0), (2, 0)]).unwrap());
        let c = mat(&[&[2.0], &[-1.0]]);
        let sys = jacobi_preset(&DenseMatrix::identity(2), &c, g).unwrap();
        assert_eq!(sys.p(), &DenseMatrix::zeros(2, 2));
        assert_eq!(sys.b(), &c);
    }

    #[test]
    fn jacobi_errors() {
        let g = Arc::new(NetworkGraph::new(3, 1, &[(1, 0), (2, 0), (1, 2), (2, 1)]).unwrap());
        let c = mat(&[&[1.0], &[1.0]]);
        let zero_diag = mat(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(jacobi_preset(&zero_diag, &c, g.clone()), Err(ForwardError::ZeroDiagonal(0))));
        let not_dominant = mat(&[&[1.0, 3.0], &[3.0, 1.0]]);
        assert!(matches!(jacobi_preset(&not_dominant, &c, g), Err(ForwardError::Divergent { radius }) if (radius - 3.0).abs() < 1e-12));
    }

    #[test]
    fn leader_follower_single_sensor_custom() {
        let g = Arc::new(NetworkGraph::new(2, 1, &[(1, 0)]).unwrap());
        let sys = leader_follower_preset(g, LeaderWeights::Custom(mat(&[&[1.0, 0.0]]))).unwrap();
        let s = StateMatrix::new(mat(&[&[4.25]]), mat(&[&[-1.0]])).unwrap();
        assert_eq!(step(&sys, &s).unwrap().x, mat(&[&[4.25]]));
    }

    #[test]
    fn leader_follower_detects_unreachable() {
        // sensor 2 hears nobody but itself
        let g = Arc::new(NetworkGraph::new(3, 1, &[(1, 0)]).unwrap());
        assert!(matches!(
            leader_follower_preset(g, LeaderWeights::Uniform),
            Err(ForwardError::Divergent { .. })
        ));
    }

    #[test]
    fn leader_follower_rejects_bad_weights() {
        let g = Arc::new(NetworkGraph::new(2, 1, &[(1, 0)]).unwrap());
        let r = leader_follower_preset(g, LeaderWeights::Custom(mat(&[&[0.5, 0.4]])));
        assert!(matches!(r, Err(ForwardError::NotRowStochastic { row: 0, .. })));
    }

    #[test]
    fn robust_run_argument_checks() {
        let sys = scalar_system(0.5, 0.5);
        let u = mat(&[&[1.0]]);
        let x = mat(&[&[0.0]]);
        assert!(matches!(robust_run(&sys, &u, &x, 0.1, 0.5, 10, 1), Err(ForwardError::GammaOutOfRange(_))));
        assert!(matches!(robust_run(&sys, &u, &x, 0.1, 1.2, 10, 1), Err(ForwardError::GammaOutOfRange(_))));
        assert!(matches!(robust_run(&sys, &u, &x, -1.0, 0.8, 10, 1), Err(ForwardError::InvalidNoise(_))));
    }

    #[test]
    fn robust_run_is_seeded() {
        let sys = scalar_system(0.5, 0.5);
        let u = mat(&[&[1.0]]);
        let x = mat(&[&[0.0]]);
        let a = robust_run(&sys, &u, &x, 0.3, 0.8, 500, 42).unwrap();
        let b = robust_run(&sys, &u, &x, 0.3, 0.8, 500, 42).unwrap();
        let c = robust_run(&sys, &u, &x, 0.3, 0.8, 500, 43).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[test]
    fn snapshots_thinned_after_full_history() {
        let sys = scalar_system(0.5, 0.5);
        let traj = robust_run(&sys, &mat(&[&[1.0]]), &mat(&[&[0.0]]), 0.0, 1.0, FULL_HISTORY_STEPS + 100, 0).unwrap();
        assert_eq!(traj.snapshots.len(), FULL_HISTORY_STEPS + 1 + 10);
        assert_eq!(traj.error_norms.len(), FULL_HISTORY_STEPS + 101);
    }

    #[test]
    fn trajectory_csv_layout() {
        let sys = scalar_system(0.5, 0.5);
        let traj = run(&sys, &mat(&[&[1.0]]), &mat(&[&[0.0]]), 1e-3, 100).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, &serde_json::json!({"tol": 1e-3})).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), r#"# {"tol":0.001}"#);
        assert_eq!(lines.next().unwrap(), "t,x1_1,error_norm");
        assert_eq!(lines.count(), traj.snapshots.len());
    }
}
