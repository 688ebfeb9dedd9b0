//! Directed communication network with an anchor/sensor split.
//!
//! Nodes are indexed from zero with the `K` anchors first, so node `l` is an
//! anchor when `l < K` and sensor row `l - K` of every designed weight matrix
//! otherwise. `adjacent(l, j)` means node `l` can receive from node `j`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("need at least one anchor and one sensor, got n={n}, k={k}")]
    BadPartition { n: usize, k: usize },
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("node {0} is an anchor; neighborhoods are defined for sensors only")]
    NotASensor(usize),
    #[error("matrix is {rows}x{cols}, pattern expects {expected_rows}x{expected_cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("invalid network file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Sensor-side neighborhoods of a single sensor, as node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub sensors: BTreeSet<usize>,
    pub anchors: BTreeSet<usize>,
}

/// Zero positions `(row, col)` of the lower `M x N` block of the adjacency
/// matrix, i.e. entries of `[B | P]` that must stay zero. Row `i` is sensor
/// node `K + i`; column `j < K` is an anchor and `j >= K` is sensor `j - K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n_sensors: usize,
    n_total: usize,
    forbidden: Vec<(usize, usize)>,
}

impl SparsityPattern {
    /// Lexicographically sorted forbidden pairs.
    pub fn forbidden(&self) -> &[(usize, usize)] {
        &self.forbidden
    }

    pub fn len(&self) -> usize {
        self.forbidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.forbidden.binary_search(&(row, col)).is_ok()
    }

    /// True when `f` (an `M x N` matrix `[B | P]`) is zero on every forbidden position.
    pub fn is_respected_by(&self, f: &DenseMatrix) -> Result<bool> {
        if f.shape() != (self.n_sensors, self.n_total) {
            return Err(GraphError::DimensionMismatch {
                rows: f.rows(),
                cols: f.cols(),
                expected_rows: self.n_sensors,
                expected_cols: self.n_total,
            });
        }
        Ok(self.forbidden.iter().all(|&(i, j)| f[(i, j)] == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n_total: usize,
    n_anchors: usize,
    // row-major N x N
    adjacency: Vec<bool>,
}

impl NetworkGraph {
    /// Builds a graph from directed edges `(l, j)` meaning `l` receives from `j`.
    /// Sensor self-loops are always added.
    pub fn new(n_total: usize, n_anchors: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_anchors == 0 || n_anchors >= n_total {
            return Err(GraphError::BadPartition {
                n: n_total,
                k: n_anchors,
            });
        }
        let g = Self::build(n_total, n_anchors, edges)?;
        let orphans = g.unanchored_sensors();
        if !orphans.is_empty() {
            log::warn!(
                "{} sensor(s) have no directed path from any anchor: {:?}",
                orphans.len(),
                orphans
            );
        }
        Ok(g)
    }

    /// A network without anchors, as used by plain average consensus.
    pub fn sensor_only(n_sensors: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_sensors == 0 {
            return Err(GraphError::BadPartition { n: 0, k: 0 });
        }
        Self::build(n_sensors, 0, edges)
    }

    /// Builds from a full `N x N` 0/1 adjacency matrix.
    pub fn from_adjacency(n_anchors: usize, adjacency: &DenseMatrix) -> Result<Self> {
        let n = adjacency.rows();
        if !adjacency.is_square() {
            return Err(GraphError::DimensionMismatch {
                rows: adjacency.rows(),
                cols: adjacency.cols(),
                expected_rows: n,
                expected_cols: n,
            });
        }
        let mut edges = Vec::new();
        for l in 0..n {
            for j in 0..n {
                match adjacency[(l, j)] {
                    1.0 => edges.push((l, j)),
                    0.0 => {}
                    v => return Err(GraphError::Format(format!("adjacency entry ({l},{j}) = {v} is not 0/1"))),
                }
            }
        }
        Self::new(n, n_anchors, &edges)
    }

    fn build(n_total: usize, n_anchors: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![false; n_total * n_total];
        for &(l, j) in edges {
            for index in [l, j] {
                if index >= n_total {
                    return Err(GraphError::IndexOutOfRange { index, n: n_total });
                }
            }
            adjacency[l * n_total + j] = true;
        }
        for l in n_anchors..n_total {
            adjacency[l * n_total + l] = true;
        }
        Ok(Self {
            n_total,
            n_anchors,
            adjacency,
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_anchors(&self) -> usize {
        self.n_anchors
    }

    pub fn n_sensors(&self) -> usize {
        self.n_total - self.n_anchors
    }

    pub fn is_anchor(&self, node: usize) -> bool {
        node < self.n_anchors
    }

    #[inline]
    pub fn adjacent(&self, l: usize, j: usize) -> bool {
        self.adjacency[l * self.n_total + j]
    }

    pub fn adjacency_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_total, self.n_total, |l, j| {
            if self.adjacent(l, j) {
                1.0
            } else {
                0.0
            }
        })
        .expect("0/1 entries are finite")
    }

    /// Directed edges `(l, j)` in lexicographic order, self-loops included.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_total)
            .flat_map(|l| (0..self.n_total).map(move |j| (l, j)))
            .filter(|&(l, j)| self.adjacent(l, j))
            .collect()
    }

    pub fn neighborhoods(&self, l: usize) -> Result<Neighborhood> {
        if l >= self.n_total {
            return Err(GraphError::IndexOutOfRange {
                index: l,
                n: self.n_total,
            });
        }
        if self.is_anchor(l) {
            return Err(GraphError::NotASensor(l));
        }
        let (anchors, sensors): (BTreeSet<usize>, BTreeSet<usize>) =
            (0..self.n_total).filter(|&j| self.adjacent(l, j)).partition(|&j| self.is_anchor(j));
        Ok(Neighborhood { sensors, anchors })
    }

    /// Anchor columns that sensor row `row` may weight.
    pub fn allowed_anchors(&self, row: usize) -> Vec<usize> {
        let l = self.n_anchors + row;
        (0..self.n_anchors).filter(|&k| self.adjacent(l, k)).collect()
    }

    /// Sensor rows (0-based among sensors) that sensor row `row` may weight.
    pub fn allowed_sensors(&self, row: usize) -> Vec<usize> {
        let l = self.n_anchors + row;
        (0..self.n_sensors())
            .filter(|&j| self.adjacent(l, self.n_anchors + j))
            .collect()
    }

    pub fn sparsity_pattern(&self) -> SparsityPattern {
        let m = self.n_sensors();
        let mut forbidden = Vec::new();
        for i in 0..m {
            let l = self.n_anchors + i;
            for j in 0..self.n_total {
                if !self.adjacent(l, j) {
                    forbidden.push((i, j));
                }
            }
        }
        SparsityPattern {
            n_sensors: m,
            n_total: self.n_total,
            forbidden,
        }
    }

    /// True when `[B | P]` only uses links present in the graph.
    pub fn associated_graph_respects(&self, f: &DenseMatrix) -> Result<bool> {
        self.sparsity_pattern().is_respected_by(f)
    }

    /// Sensors that no anchor can reach along directed edges.
    pub fn unanchored_sensors(&self) -> Vec<usize> {
        let n = self.n_total;
        let mut reached = vec![false; n];
        let mut stack: Vec<usize> = (0..self.n_anchors).collect();
        for &a in &stack {
            reached[a] = true;
        }
        while let Some(j) = stack.pop() {
            // j -> l whenever l receives from j
            for l in 0..n {
                if !reached[l] && self.adjacent(l, j) {
                    reached[l] = true;
                    stack.push(l);
                }
            }
        }
        (self.n_anchors..n).filter(|&l| !reached[l]).collect()
    }

    /// Whether the sensor subgraph restricted to bidirectional links is connected.
    pub fn sensors_bidirectionally_connected(&self) -> bool {
        let k = self.n_anchors;
        let m = self.n_sensors();
        if m == 0 {
            return true;
        }
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                if !seen[j] && self.adjacent(k + i, k + j) && self.adjacent(k + j, k + i) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.into_graph()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_network_file(&self) -> NetworkFile {
        NetworkFile {
            n: self.n_total,
            k: self.n_anchors,
            edges: self
                .edges()
                .into_iter()
                .filter(|&(l, j)| !(l == j && l >= self.n_anchors))
                .map(|(l, j)| [l + 1, j + 1])
                .collect(),
        }
    }
}

/// On-disk network description with 1-based node numbers; edge `[l, j]` means
/// `l` receives from `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub k: usize,
    pub edges: Vec<[usize; 2]>,
}

impl NetworkFile {
    pub fn into_graph(self) -> Result<NetworkGraph> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for [l, j] in self.edges {
            if l == 0 || j == 0 || l > self.n || j > self.n {
                return Err(GraphError::Format(format!(
                    "edge [{l}, {j}] outside 1..={}",
                    self.n
                )));
            }
            edges.push((l - 1, j - 1));
        }
        NetworkGraph::new(self.n, self.k, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn line_graph_neighborhood() {
        // 1 - 2 - 3 with node 1 the anchor
        let g = NetworkGraph::new(3, 1, &[(1, 0), (1, 2), (2, 1)]).unwrap();
        let nb = g.neighborhoods(1).unwrap();
        assert_eq!(nb.sensors, set(&[1, 2]));
        assert_eq!(nb.anchors, set(&[0]));
    }

    #[test]
    fn isolated_sensor_has_only_itself() {
        let g = NetworkGraph::new(3, 1, &[(1, 0)]).unwrap();
        let nb = g.neighborhoods(2).unwrap();
        assert_eq!(nb.sensors, set(&[2]));
        assert!(nb.anchors.is_empty());
        assert_eq!(g.unanchored_sensors(), vec![2]);
    }

    #[test]
    fn complete_graph_neighborhood() {
        let edges: Vec<_> = (0..4).flat_map(|l| (0..4).map(move |j| (l, j))).collect();
        let g = NetworkGraph::new(4, 2, &edges).unwrap();
        let nb = g.neighborhoods(2).unwrap();
        assert_eq!(nb.sensors, set(&[2, 3]));
        assert_eq!(nb.anchors, set(&[0, 1]));
        assert!(g.sparsity_pattern().is_empty());
    }

    #[test]
    fn neighborhood_errors() {
        let g = NetworkGraph::new(3, 1, &[]).unwrap();
        assert!(matches!(g.neighborhoods(0), Err(GraphError::NotASensor(0))));
        assert!(matches!(g.neighborhoods(3), Err(GraphError::IndexOutOfRange { .. })));
    }

    #[test]
    fn partition_checked() {
        assert!(NetworkGraph::new(3, 3, &[]).is_err());
        assert!(NetworkGraph::new(3, 0, &[]).is_err());
        assert!(NetworkGraph::new(3, 1, &[(0, 5)]).is_err());
    }

    #[test]
    fn pattern_read_off_lower_block() {
        // edges 2<-1, 2<-2, 3<-3 in 1-based numbering
        let g = NetworkGraph::new(3, 1, &[(1, 0), (1, 1), (2, 2)]).unwrap();
        let pat = g.sparsity_pattern();
        assert_eq!(pat.forbidden(), &[(0, 2), (1, 0), (1, 1)]);
    }

    #[test]
    fn respects_checks() {
        let g = NetworkGraph::new(3, 1, &[(1, 0)]).unwrap();
        let zero = DenseMatrix::zeros(2, 3);
        assert!(g.associated_graph_respects(&zero).unwrap());
        let mut bad = zero.clone();
        bad[(1, 0)] = 0.3;
        assert!(!g.associated_graph_respects(&bad).unwrap());
        assert!(g.associated_graph_respects(&DenseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn json_round_trip_and_implicit_loops() {
        let text = r#"{"n": 4, "k": 1, "edges": [[2,1],[3,2],[4,3]]}"#;
        let g = NetworkGraph::from_json_str(text).unwrap();
        assert!(g.adjacent(1, 1) && g.adjacent(2, 2) && g.adjacent(3, 3));
        assert!(!g.adjacent(0, 0));
        let again = g.to_network_file().into_graph().unwrap();
        assert_eq!(again, g);
        assert!(NetworkGraph::from_json_str(r#"{"n": 2, "k": 1, "edges": [[0,1]]}"#).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = NetworkGraph> {
        (2usize..9)
            .prop_flat_map(|n| (Just(n), 1..n, proptest::collection::vec(any::<bool>(), n * n)))
            .prop_map(|(n, k, bits)| {
                let edges: Vec<_> = (0..n * n).filter(|&e| bits[e]).map(|e| (e / n, e % n)).collect();
                NetworkGraph::new(n, k, &edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn neighborhoods_partition_in_neighbors(g in arb_graph()) {
            for l in g.n_anchors()..g.n_total() {
                let nb = g.neighborhoods(l).unwrap();
                prop_assert!(nb.sensors.is_disjoint(&nb.anchors));
                let all: BTreeSet<usize> = nb.sensors.union(&nb.anchors).copied().collect();
                let direct: BTreeSet<usize> = (0..g.n_total()).filter(|&j| g.adjacent(l, j)).collect();
                prop_assert_eq!(all, direct);
            }
        }

        #[test]
        fn pattern_matches_rescan_and_is_stable(g in arb_graph()) {
            let pat = g.sparsity_pattern();
            prop_assert_eq!(&pat, &g.sparsity_pattern());
            let adj = g.adjacency_matrix();
            let (k, n) = (g.n_anchors(), g.n_total());
            let mut rescan = Vec::new();
            for i in 0..n - k {
                for j in 0..n {
                    if adj[(k + i, j)] == 0.0 {
                        rescan.push((i, j));
                    }
                }
            }
            let ones: usize = (k..n).map(|l| (0..n).filter(|&j| adj[(l, j)] == 1.0).count()).sum();
            prop_assert_eq!(pat.len(), (n - k) * n - ones);
            prop_assert_eq!(pat.forbidden(), rescan.as_slice());
        }

        #[test]
        fn zeroing_entries_keeps_respect(g in arb_graph(), seed in proptest::collection::vec(-1.0f64..1.0, 64), mask in proptest::collection::vec(any::<bool>(), 64)) {
            let (k, n) = (g.n_anchors(), g.n_total());
            let m = n - k;
            let f = DenseMatrix::from_fn(m, n, |i, j| if g.adjacent(k + i, j) { seed[(i * n + j) % 64] } else { 0.0 }).unwrap();
            prop_assert!(g.associated_graph_respects(&f).unwrap());
            let zeroed = DenseMatrix::from_fn(m, n, |i, j| if mask[(i * n + j) % 64] { 0.0 } else { f[(i, j)] }).unwrap();
            prop_assert!(g.associated_graph_respects(&zeroed).unwrap());
        }
    }
}
