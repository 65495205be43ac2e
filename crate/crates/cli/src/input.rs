use std::fs;
use std::path::Path;

use odg_core::contrasts::{detect_pairwise, parse_contrast_matrix, parse_edge_list};
use odg_core::{ComparisonGraph, ContrastSystem, Design};

use crate::exit::{Failure, EXIT_INFEASIBLE, EXIT_PARSE};

/// A loaded `--q` file: the contrast system, plus its graph when pairwise.
pub struct Loaded {
    pub sys: ContrastSystem,
    pub graph: Option<ComparisonGraph>,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))
}

/// Edge lists start with a `v=<n>` line; anything else is a CSV matrix.
pub fn load_system(path: &Path) -> Result<Loaded, Failure> {
    let text = read(path)?;
    let is_edge_list = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("v="));
    let parse_err =
        |e: odg_core::Error| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display()));
    if is_edge_list {
        let graph = parse_edge_list(&text).map_err(parse_err)?;
        let sys = graph.to_system().map_err(parse_err)?;
        Ok(Loaded {
            sys,
            graph: Some(graph),
        })
    } else {
        let sys = parse_contrast_matrix(&text).map_err(parse_err)?;
        let graph = detect_pairwise(&sys);
        Ok(Loaded { sys, graph })
    }
}

/// Weights from a file, or inline when `weights_arg` is not an existing path.
/// Separators may be commas, whitespace or newlines.
pub fn load_weights(weights_arg: &str) -> Result<Vec<f64>, Failure> {
    let path = Path::new(weights_arg);
    let text = if path.is_file() {
        read(path)?
    } else {
        weights_arg.to_string()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Failure::new(EXIT_PARSE, format!("weight {t:?} is not a number")))
        })
        .collect()
}

/// Rescales positive weights to sum to one; zero, negative or non-finite
/// entries are infeasible.
pub fn to_design(w: Vec<f64>, v: usize) -> Result<Design, Failure> {
    if w.len() != v {
        return Err(Failure::new(
            EXIT_INFEASIBLE,
            format!("{} weights given for {v} treatments", w.len()),
        ));
    }
    Design::from_unnormalized(w).map_err(|e| Failure::new(EXIT_INFEASIBLE, e.to_string()))
}
