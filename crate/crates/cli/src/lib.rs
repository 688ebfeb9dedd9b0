//! `hdc` command implementations. Every command reads its inputs, writes its
//! artifacts atomically into the output directory and maps failures onto a
//! fixed exit-code protocol.

pub mod svg;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand};
use hdc_core::forward::{self, ForwardError, IterationSystem};
use hdc_core::graph::{GraphError, NetworkGraph};
use hdc_core::learning::{self, LearningError, LearningSpec, ParetoFront, TradeoffResult};
use hdc_core::linalg::{self, induced_norm, DenseMatrix, LinalgError, NormKind, DEFAULT_RANK_TOL};
use serde_json::json;
use thiserror::Error;

use crate::svg::CostMark;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_DIVERGENT: i32 = 2;
pub const EXIT_UNACHIEVABLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Divergent(String),
    #[error("{0}")]
    Unachievable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Divergent(_) => EXIT_DIVERGENT,
            CliError::Unachievable(_) => EXIT_UNACHIEVABLE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Input(format!("network: {e}"))
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Divergent { .. } => CliError::Divergent(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ForwardError> for CliError {
    fn from(e: ForwardError) -> Self {
        match e {
            ForwardError::Divergent { .. } | ForwardError::MaxIters { .. } => CliError::Divergent(e.to_string()),
            ForwardError::Linalg(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<LearningError> for CliError {
    fn from(e: LearningError) -> Self {
        match e {
            LearningError::UnachievableCost { .. } => CliError::Unachievable(e.to_string()),
            LearningError::Linalg(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hdc", version, about = "Anchored linear consensus: simulate, analyze and learn weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate X(t+1) = P X(t) + B U(0) and record the trajectory.
    Simulate(SimulateArgs),
    /// Report spectral radius, norms and consensus-subspace dimension.
    Analyze(AnalyzeArgs),
    /// Learn weights for a single norm budget.
    Learn(LearnArgs),
    /// Build the accuracy/speed front over a budget grid.
    Pareto(ParetoArgs),
    /// Pick an operating point for a cost cap or a speed requirement.
    Tradeoff(TradeoffArgs),
}

fn existing_path(s: &str) -> std::result::Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.exists() {
        Ok(p)
    } else {
        Err(format!("{s} does not exist"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s}")),
    }
}

fn unit_budget(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a value in [0, 1), got {s}")),
    }
}

fn nonnegative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a nonnegative number, got {s}")),
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Directory for all artifacts (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Network JSON: {"n", "k", "edges": [[receiver, sender], ...]}, 1-based, anchors first.
    #[arg(long, value_parser = existing_path)]
    pub network: PathBuf,
    /// Anchor weights B (M x K) as CSV.
    #[arg(long, value_parser = existing_path)]
    pub b: PathBuf,
    /// Sensor weights P (M x M) as CSV.
    #[arg(long, value_parser = existing_path)]
    pub p: PathBuf,
    /// Anchor states U(0) (K x m) as CSV.
    #[arg(long, value_parser = existing_path)]
    pub u0: PathBuf,
    /// Initial sensor states; zeros when omitted.
    #[arg(long, value_parser = existing_path)]
    pub x0: Option<PathBuf>,
    /// Stop once the certified (or successive) error is at most this.
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    pub tol: f64,
    /// Iteration cap; reaching it exits with code 2.
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Link-noise standard deviation; switches to the damped noisy update.
    #[arg(long, value_parser = nonnegative)]
    pub noise: Option<f64>,
    /// Step-size exponent for the noisy update.
    #[arg(long, default_value_t = 0.8)]
    pub gamma: f64,
    /// Seed for the noise stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Network JSON: {"n", "k", "edges": [[receiver, sender], ...]}, 1-based, anchors first.
    #[arg(long, value_parser = existing_path)]
    pub network: PathBuf,
    /// Anchor weights B (M x K) as CSV.
    #[arg(long, value_parser = existing_path)]
    pub b: PathBuf,
    /// Sensor weights P (M x M) as CSV.
    #[arg(long, value_parser = existing_path)]
    pub p: PathBuf,
    /// State width used for the subspace dimension.
    #[arg(long, default_value_t = 1)]
    pub width: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Network JSON: {"n", "k", "edges": [[receiver, sender], ...]}, 1-based, anchors first.
    #[arg(long, value_parser = existing_path)]
    pub network: PathBuf,
    /// Target weight matrix W (M x K).
    #[arg(long, value_parser = existing_path)]
    pub weights: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Norm budget on P, in [0, 1).
    #[arg(long, value_parser = unit_budget)]
    pub eps: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated budgets; default is 64 points on [0, 0.99] refined near 1.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Budgets whose constant-cost lines are drawn.
    #[arg(long, value_delimiter = ',')]
    pub mark_eps: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["cost", "speed"])))]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated budgets; default is 64 points on [0, 0.99] refined near 1.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Largest acceptable utility; the fastest point meeting it is chosen.
    #[arg(long, value_parser = nonnegative)]
    pub cost: Option<f64>,
    /// Norm budget that must not be exceeded; the cheapest point is chosen.
    #[arg(long, value_parser = unit_budget)]
    pub speed: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Human-readable outcome of a successful command.
#[derive(Debug)]
pub struct Outcome {
    pub message: String,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Learn(a) => cmd_learn(&a),
        Command::Pareto(a) => cmd_pareto(&a),
        Command::Tradeoff(a) => cmd_tradeoff(&a),
    }
}

fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    linalg::read_matrix_csv(BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_network(path: &Path) -> Result<Arc<NetworkGraph>> {
    NetworkGraph::from_json_file(path)
        .map(Arc::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_atomic(path, |w| {
        linalg::write_matrix_csv(w, m).map_err(|e| std::io::Error::other(e.to_string()))
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// JSON has no infinities; they are written as `null`.
fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let graph = read_network(&a.network)?;
    let sys = IterationSystem::new(graph, read_matrix(&a.b)?, read_matrix(&a.p)?)?;
    let u0 = read_matrix(&a.u0)?;
    let x0 = match &a.x0 {
        Some(p) => read_matrix(p)?,
        None => DenseMatrix::zeros(sys.n_sensors(), u0.cols()),
    };
    prepare_out(&a.output.out)?;
    let result = match a.noise {
        Some(sigma) => forward::robust_run(&sys, &u0, &x0, sigma, a.gamma, a.max_iters, a.seed),
        None => forward::run(&sys, &u0, &x0, a.tol, a.max_iters),
    };
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(ForwardError::MaxIters { trajectory }) => {
            let msg = format!("no convergence within {} iterations", trajectory.iterations);
            (*trajectory, Some(CliError::Divergent(msg)))
        }
        Err(e) => return Err(e.into()),
    };
    let config = json!({
        "command": "simulate",
        "tol": a.tol,
        "max_iters": a.max_iters,
        "noise": a.noise,
        "gamma": a.gamma,
        "seed": a.seed,
    });
    let out = &a.output.out;
    write_atomic(&out.join("trajectory.csv"), |w| traj.write_csv(w, &config))?;
    let decay = forward::decay_exponent(&traj).ok();
    let summary = json!({
        "spectral_radius": sys.spectral_radius(),
        "iterations": traj.iterations,
        "converged": traj.converged && failure.is_none(),
        "final_error": traj.error_norms.last().copied(),
        "certified_error_bound": traj.certified_error_bound,
        "decay_exponent": decay.map(finite_or_null),
    });
    write_json(&out.join("summary.json"), &summary)?;
    if let Some(f) = failure {
        return Err(f);
    }
    Ok(Outcome {
        message: format!(
            "converged in {} iterations (spectral radius {:.6})",
            traj.iterations,
            sys.spectral_radius()
        ),
    })
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let graph = read_network(&a.network)?;
    let sys = IterationSystem::new(graph.clone(), read_matrix(&a.b)?, read_matrix(&a.p)?)?;
    prepare_out(&a.output.out)?;
    let (dimension, reason) = match forward::consensus_dimension(&sys, a.width) {
        Ok((dim, per_column)) => (Some(json!({"subspace_dim": dim, "hdc_dim": per_column})), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = json!({
        "spectral_radius": sys.spectral_radius(),
        "convergent": sys.is_convergent(),
        "norm_inf_p": induced_norm(sys.p(), NormKind::Infinity),
        "norm_one_p": induced_norm(sys.p(), NormKind::One),
        "rank_b": linalg::numerical_rank(sys.b(), DEFAULT_RANK_TOL),
        "consensus_dimension": dimension,
        "dimension_unavailable": reason,
        "unanchored_sensors": graph.unanchored_sensors(),
    });
    write_json(&a.output.out.join("analysis.json"), &report)?;
    Ok(Outcome {
        message: format!("spectral radius {:.6}", sys.spectral_radius()),
    })
}

fn load_problem(p: &ProblemArgs, grid: Option<&Vec<f64>>) -> Result<LearningSpec> {
    let graph = read_network(&p.network)?;
    let spec = LearningSpec::new(graph, read_matrix(&p.weights)?)?;
    Ok(match grid {
        Some(g) => spec.with_grid(g.clone())?,
        None => spec,
    })
}

pub fn cmd_learn(a: &LearnArgs) -> Result<Outcome> {
    let ws = load_problem(&a.problem, None)?;
    prepare_out(&a.output.out)?;
    let pt = learning::p1(&ws, a.eps)?;
    let e_ss = pt.steady_state_error(ws.target())?;
    let exact = learning::p2_zero(&ws)?;
    let out = &a.output.out;
    write_matrix(&out.join("B.csv"), &pt.b)?;
    write_matrix(&out.join("P.csv"), &pt.p)?;
    let report = json!({
        "eps": pt.eps,
        "delta": pt.delta,
        "utility": pt.utility,
        "norm_p": pt.norm_p,
        "spectral_radius": pt.spectral_radius,
        "beyond_exact": pt.beyond_exact,
        "e_ss_actual": e_ss,
        "eps_exact": finite_or_null(exact.eps_exact),
    });
    write_json(&out.join("learn.json"), &report)?;
    Ok(Outcome {
        message: format!("eps {} -> residual {:.6e}, utility {:.6e}", pt.eps, pt.delta, pt.utility),
    })
}

fn front_point_at(ws: &LearningSpec, front: &ParetoFront, eps: f64) -> Result<(f64, f64, f64)> {
    let r = learning::tradeoff_fixed_speed(ws, front, eps)?;
    let delta = r.operating_cost * (1.0 - r.operating_eps);
    Ok((r.operating_eps, delta, r.operating_cost))
}

pub fn cmd_pareto(a: &ParetoArgs) -> Result<Outcome> {
    let ws = load_problem(&a.problem, a.eps_grid.as_ref())?;
    if let Some(bad) = a.mark_eps.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(CliError::Input(format!("--mark-eps {bad} is outside [0, 1)")));
    }
    prepare_out(&a.output.out)?;
    let front = learning::pareto_front(&ws)?;
    let out = &a.output.out;
    write_atomic(&out.join("front.csv"), |w| front.write_csv(w))?;
    let solutions = out.join("solutions");
    prepare_out(&solutions)?;
    for pt in &front.points {
        write_matrix(&solutions.join(format!("B_eps_{:.6}.csv", pt.eps)), &pt.b)?;
        write_matrix(&solutions.join(format!("P_eps_{:.6}.csv", pt.eps)), &pt.p)?;
    }
    let marks = a
        .mark_eps
        .iter()
        .map(|&e| front_point_at(&ws, &front, e).map(|(eps, delta, cost)| CostMark { eps, delta, cost }))
        .collect::<Result<Vec<_>>>()?;
    let picture = svg::render_front(&front, &marks);
    write_atomic(&out.join("front.svg"), |w| w.write_all(picture.as_bytes()))?;
    let report = json!({
        "eps_exact": finite_or_null(front.eps_exact),
        "c_inf": front.c_inf,
        "points": front.points,
    });
    write_json(&out.join("pareto.json"), &report)?;
    Ok(Outcome {
        message: format!(
            "{} front points, eps_exact {}, c_inf {:.6e}",
            front.points.len(),
            front.eps_exact,
            front.c_inf
        ),
    })
}

fn tradeoff_report(r: &TradeoffResult) -> serde_json::Value {
    json!({
        "operating_eps": r.operating_eps,
        "cost": r.operating_cost,
        "e_ss_bound": r.e_ss_bound,
        "e_ss_actual": r.e_ss_actual,
        "rho_P": r.spectral_radius,
        "cost_line": {"slope": r.cost_line.slope, "intercept": r.cost_line.intercept},
    })
}

pub fn cmd_tradeoff(a: &TradeoffArgs) -> Result<Outcome> {
    let ws = load_problem(&a.problem, a.eps_grid.as_ref())?;
    prepare_out(&a.output.out)?;
    let front = learning::pareto_front(&ws)?;
    let r = match (a.cost, a.speed) {
        (Some(c), None) => learning::tradeoff_fixed_cost(&ws, &front, c)?,
        (None, Some(e)) => learning::tradeoff_fixed_speed(&ws, &front, e)?,
        _ => return Err(CliError::Input("exactly one of --cost or --speed is required".into())),
    };
    let out = &a.output.out;
    write_matrix(&out.join("B.csv"), &r.b)?;
    write_matrix(&out.join("P.csv"), &r.p)?;
    let mut report = tradeoff_report(&r);
    report["eps_exact"] = finite_or_null(front.eps_exact);
    report["c_inf"] = json!(front.c_inf);
    write_json(&out.join("tradeoff.json"), &report)?;
    Ok(Outcome {
        message: format!(
            "operating eps {} with cost {:.6e} (limit error {:.3e})",
            r.operating_eps, r.operating_cost, r.e_ss_actual
        ),
    })
}
