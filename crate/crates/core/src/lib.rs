//! Anchored linear consensus on directed networks: simulation of the
//! iteration, spectral analysis, and learning of sparse weight matrices that
//! trade steady-state accuracy against convergence speed.

pub mod forward;
pub mod graph;
pub mod instances;
pub mod learning;
pub mod linalg;
pub mod lp;
