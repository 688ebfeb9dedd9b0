#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdc_core::graph::NetworkGraph;
use hdc_core::linalg::{read_matrix_csv, write_matrix_csv, DenseMatrix};

pub fn hdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdc"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn save_network(dir: &Path, name: &str, g: &NetworkGraph) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(&g.to_network_file()).unwrap()).unwrap();
    path
}

pub fn save_matrix(dir: &Path, name: &str, m: &DenseMatrix) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, m).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

pub fn load_matrix(path: &Path) -> DenseMatrix {
    read_matrix_csv(std::fs::read(path).unwrap().as_slice()).unwrap()
}

pub fn load_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Front CSV rows as `(eps, delta, utility, spectral_radius)`.
pub fn load_front(path: &Path) -> Vec<[f64; 4]> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .collect()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every sensor hears every anchor, so `B = W`, `P = 0` is exact.
pub fn case_ii(dir: &Path) -> (PathBuf, PathBuf) {
    let g = NetworkGraph::new(5, 2, &[(2, 0), (2, 1), (3, 0), (3, 1), (4, 0), (4, 1), (3, 2), (4, 3)]).unwrap();
    let w = DenseMatrix::from_rows(&[[0.4, 0.6], [-1.0, 2.0], [0.25, 0.0]]).unwrap();
    (save_network(dir, "case_ii.json", &g), save_matrix(dir, "case_ii_w.csv", &w))
}

/// Sensor 3 can only reach anchor targets through sensor 2: exact at budget 0.5.
pub fn relay(dir: &Path) -> (PathBuf, PathBuf) {
    let g = NetworkGraph::new(4, 2, &[(2, 0), (2, 1), (3, 2)]).unwrap();
    let w = DenseMatrix::from_rows(&[[0.25, 0.25], [0.125, 0.125]]).unwrap();
    (save_network(dir, "relay.json", &g), save_matrix(dir, "relay_w.csv", &w))
}

/// No exact solution at any budget below one.
pub fn inexact(dir: &Path) -> (PathBuf, PathBuf) {
    let g = NetworkGraph::new(5, 2, &[(2, 0), (2, 3), (3, 1), (3, 4), (4, 0), (4, 2)]).unwrap();
    let w = DenseMatrix::from_rows(&[[0.6, 0.3], [-0.4, 0.9], [0.2, -0.7]]).unwrap();
    (save_network(dir, "inexact.json", &g), save_matrix(dir, "inexact_w.csv", &w))
}
