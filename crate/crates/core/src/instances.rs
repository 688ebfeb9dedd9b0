//! Seeded random networks, weights and learning problems for experiments and
//! tests.

use std::sync::Arc;

use rand::Rng;

use crate::forward::IterationSystem;
use crate::graph::NetworkGraph;
use crate::learning::LearningSpec;
use crate::linalg::{induced_norm, limit_map, spectral_radius, DenseMatrix, NormKind};

/// Sensors hear each other with probability `sensor_density` and each anchor
/// with probability `anchor_density`; every sensor hears at least one anchor.
pub fn random_network<R: Rng>(
    rng: &mut R,
    n_sensors: usize,
    n_anchors: usize,
    sensor_density: f64,
    anchor_density: f64,
) -> NetworkGraph {
    let n = n_sensors + n_anchors;
    let mut edges = Vec::new();
    for l in n_anchors..n {
        let mut heard_anchor = false;
        for a in 0..n_anchors {
            if rng.random_bool(anchor_density) {
                edges.push((l, a));
                heard_anchor = true;
            }
        }
        if !heard_anchor && n_anchors > 0 {
            edges.push((l, rng.random_range(0..n_anchors)));
        }
        for j in n_anchors..n {
            if j != l && rng.random_bool(sensor_density) {
                edges.push((l, j));
            }
        }
    }
    NetworkGraph::new(n, n_anchors, &edges).expect("edges are in range")
}

/// Complete network: every sensor hears every node.
pub fn complete_network(n_sensors: usize, n_anchors: usize) -> NetworkGraph {
    let n = n_sensors + n_anchors;
    let edges: Vec<_> = (n_anchors..n).flat_map(|l| (0..n).map(move |j| (l, j))).collect();
    NetworkGraph::new(n, n_anchors, &edges).expect("edges are in range")
}

/// Anchor-free network whose bidirectional links contain a random spanning
/// tree plus extra symmetric links with probability `extra_density`.
pub fn random_connected_sensor_network<R: Rng>(rng: &mut R, n_sensors: usize, extra_density: f64) -> NetworkGraph {
    let mut edges = Vec::new();
    for i in 1..n_sensors {
        let parent = rng.random_range(0..i);
        edges.push((i, parent));
        edges.push((parent, i));
    }
    for i in 0..n_sensors {
        for j in i + 1..n_sensors {
            if rng.random_bool(extra_density) {
                edges.push((i, j));
                edges.push((j, i));
            }
        }
    }
    NetworkGraph::sensor_only(n_sensors, &edges).expect("edges are in range")
}

/// Uniform `[-1, 1]` weights on the allowed positions, with `P` rescaled so
/// that `rho(P) = radius`.
pub fn random_system<R: Rng>(rng: &mut R, graph: Arc<NetworkGraph>, radius: f64) -> IterationSystem {
    let (m, k) = (graph.n_sensors(), graph.n_anchors());
    let b = DenseMatrix::from_fn(m, k, |i, a| {
        if graph.adjacent(k + i, a) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    })
    .expect("finite entries");
    let raw = DenseMatrix::from_fn(m, m, |i, j| {
        if graph.adjacent(k + i, k + j) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    })
    .expect("finite entries");
    let rho = spectral_radius(&raw).expect("square matrix");
    let p = if rho > 0.0 { raw.scale(radius / rho) } else { raw };
    IterationSystem::new(graph, b, p).expect("weights follow the graph")
}

/// Uniform `[-1, 1]` matrix.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).expect("finite entries")
}

/// Product of random `rows x rank` and `rank x cols` factors.
pub fn random_low_rank<R: Rng>(rng: &mut R, rows: usize, cols: usize, rank: usize) -> DenseMatrix {
    let left = random_matrix(rng, rows, rank);
    let right = random_matrix(rng, rank, cols);
    left.matmul(&right).expect("inner dimensions agree")
}

/// Learning problem with a uniform random target on a random network.
pub fn random_learning_spec<R: Rng>(
    rng: &mut R,
    n_sensors: usize,
    n_anchors: usize,
    sensor_density: f64,
    anchor_density: f64,
) -> LearningSpec {
    let graph = random_network(rng, n_sensors, n_anchors, sensor_density, anchor_density);
    let w = random_matrix(rng, n_sensors, n_anchors);
    LearningSpec::new(Arc::new(graph), w).expect("target matches the network")
}

/// Learning problem whose target is the limit map of random feasible weights
/// with `||P||_inf = p_norm < 1`, so an exact solution exists.
pub fn exactly_solvable_spec<R: Rng>(
    rng: &mut R,
    n_sensors: usize,
    n_anchors: usize,
    sensor_density: f64,
    anchor_density: f64,
    p_norm: f64,
) -> LearningSpec {
    let graph = Arc::new(random_network(rng, n_sensors, n_anchors, sensor_density, anchor_density));
    let sys = random_system(rng, graph.clone(), 0.5);
    let p = sys.p();
    let current = induced_norm(p, NormKind::Infinity);
    let p = if current > 0.0 { p.scale(p_norm / current) } else { p.clone() };
    let w = limit_map(&p, sys.b()).expect("contractive P");
    LearningSpec::new(graph, w).expect("target matches the network")
}
