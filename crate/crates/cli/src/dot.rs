use std::fmt::Write;

use odg_core::ComparisonGraph;

/// Graphviz digraph with an arc `j -> i` for every contrast `tau_j - tau_i`.
/// Vertices are 1-indexed; with weights they are labelled `i | a=alpha_i`.
pub fn render(g: &ComparisonGraph, alphas: Option<&[f64]>) -> String {
    let mut out = String::from("digraph comparisons {\n");
    for i in 0..g.v() {
        let label = match alphas {
            Some(a) => format!("{} | a={:.4}", i + 1, a[i]),
            None => format!("{}", i + 1),
        };
        writeln!(out, "  {} [label=\"{label}\"];", i + 1).unwrap();
    }
    for &(j, i) in g.edges() {
        writeln!(out, "  {} -> {};", j + 1, i + 1).unwrap();
    }
    out.push_str("}\n");
    out
}
