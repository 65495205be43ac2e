#![allow(dead_code)]

use nalgebra::DMatrix;
use odg_core::{ComparisonGraph, ContrastSystem, Design};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random simple graph on `v` vertices with edge probability `density`,
/// retried until no vertex is isolated. Orientation is random.
pub fn random_graph(rng: &mut ChaCha8Rng, v: usize, density: f64) -> ComparisonGraph {
    loop {
        let mut edges = Vec::new();
        for a in 0..v {
            for b in a + 1..v {
                if rng.random_bool(density) {
                    edges.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
                }
            }
        }
        let covered = (0..v).all(|u| edges.iter().any(|&(a, b)| a == u || b == u));
        if covered {
            return ComparisonGraph::new(v, edges).unwrap();
        }
    }
}

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, v: usize, extra: f64) -> ComparisonGraph {
    let mut edges = Vec::new();
    for b in 1..v {
        let a = rng.random_range(0..b);
        edges.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
    }
    for a in 0..v {
        for b in a + 1..v {
            let present = edges
                .iter()
                .any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a));
            if !present && rng.random_bool(extra) {
                edges.push((b, a));
            }
        }
    }
    ComparisonGraph::new(v, edges).unwrap()
}

/// Random design with weights bounded away from zero.
pub fn random_design(rng: &mut ChaCha8Rng, v: usize) -> Design {
    Design::from_unnormalized((0..v).map(|_| rng.random_range(0.02..1.0)).collect()).unwrap()
}

/// Random `v x s` contrast matrix with centred Gaussian-like columns.
pub fn random_contrasts(rng: &mut ChaCha8Rng, v: usize, s: usize) -> ContrastSystem {
    let mut q = DMatrix::from_fn(v, s, |_, _| rng.random_range(-1.0..1.0));
    for mut col in q.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    ContrastSystem::new(q).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}
