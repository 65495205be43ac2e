//! Frequently used systems of contrasts.

use nalgebra::DMatrix;

use crate::contrasts::{ComparisonGraph, ContrastSystem};
use crate::error::Result;

/// `tau_2 - tau_1, tau_3 - tau_2, ..., tau_1 - tau_v`.
pub fn cyclic_comparisons(v: usize) -> Result<ComparisonGraph> {
    let edges = (0..v).map(|i| ((i + 1) % v, i)).collect();
    ComparisonGraph::new(v, edges)
}

/// `tau_j - tau_i` for controls `i < g` and treatments `j >= g` (0-indexed).
pub fn treatments_vs_controls(v: usize, g: usize) -> Result<ComparisonGraph> {
    let edges = (0..g).flat_map(|i| (g..v).map(move |j| (j, i))).collect();
    ComparisonGraph::new(v, edges)
}

/// Two sets of equal size `g` compared with each other; `v = 2g`.
pub fn two_sets(g: usize) -> Result<ComparisonGraph> {
    treatments_vs_controls(2 * g, g)
}

/// All pairwise comparisons `tau_j - tau_i`, `j > i`.
pub fn all_pairwise(v: usize) -> Result<ComparisonGraph> {
    let edges = (0..v)
        .flat_map(|i| (i + 1..v).map(move |j| (j, i)))
        .collect();
    ComparisonGraph::new(v, edges)
}

/// Comparisons with a single control: `tau_j - tau_1`.
pub fn comparisons_with_control(v: usize) -> Result<ComparisonGraph> {
    treatments_vs_controls(v, 1)
}

/// Path `1 - 2 - ... - v` with edges `tau_{i+1} - tau_i`.
pub fn path(v: usize) -> Result<ComparisonGraph> {
    let edges = (0..v.saturating_sub(1)).map(|i| (i + 1, i)).collect();
    ComparisonGraph::new(v, edges)
}

/// Centered contrasts `tau_i - mean(tau)`, `Q = I - J/v`.
pub fn centered(v: usize) -> Result<ContrastSystem> {
    let vf = v as f64;
    ContrastSystem::new(DMatrix::from_fn(v, v, |i, j| {
        if i == j {
            1.0 - 1.0 / vf
        } else {
            -1.0 / vf
        }
    }))
}

/// Single contrast comparing the average of treatments `2..v` with
/// treatment 1: `Q = (-1, 1_{v-1}^T / (v-1))^T`.
pub fn average_vs_control(v: usize) -> Result<ContrastSystem> {
    let share = 1.0 / (v as f64 - 1.0);
    let mut col = vec![share; v];
    col[0] = -1.0;
    ContrastSystem::new(DMatrix::from_column_slice(v, 1, &col))
}
