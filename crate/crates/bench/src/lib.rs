//! Benchmark fixtures shared by the criterion targets.

use moment_core::assembly::{BoundaryConditions, DiscreteSystem};
use moment_core::grid::{classify_nodes, Grid};
use moment_core::models::ModelSpec;

/// Monge-Ampère test problem (f = 1, g = 0) on an n×n unit-square grid.
pub fn test1_system(n: usize, eps: f64) -> DiscreteSystem {
    let grid = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).expect("valid grid");
    let model = ModelSpec::monge_ampere(|_| 1.0, |_| 0.0);
    let sets = classify_nodes(&grid);
    let bcs = BoundaryConditions::from_model(&grid, &sets, &model, eps).expect("valid bcs");
    DiscreteSystem::new(&grid, model, eps, bcs).expect("valid system")
}
