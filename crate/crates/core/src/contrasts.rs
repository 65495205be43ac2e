//! Systems of treatment contrasts and their comparison graphs.
//!
//! A system is stored as its `v x s` coefficient matrix `Q`. When every
//! column has a single `+1`, a single `-1` and zeros elsewhere, the system is
//! a set of pairwise comparisons and `Q` is the incidence matrix of a
//! directed graph on the treatments.
//!
//! Vertices are 0-indexed in this crate. The parsers and the CLI speak
//! 1-indexed vertices.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::eigenvalues_sym;

/// Relative threshold for counting an eigenvalue as non-zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const CONTRAST_SUM_TOL: f64 = 1e-12;

/// Coefficient matrix of a system of treatment contrasts `Q^T tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSystem {
    q: DMatrix<f64>,
}

impl ContrastSystem {
    /// Validates the contrast condition `Q^T 1 = 0` and that every
    /// treatment takes part in at least one contrast.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        let (v, s) = q.shape();
        if v < 2 {
            return Err(Error::MalformedInput(format!(
                "need at least 2 treatments, got {v}"
            )));
        }
        if s < 1 {
            return Err(Error::MalformedInput("need at least one contrast".into()));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::MalformedInput("non-finite coefficient".into()));
        }
        for (k, col) in q.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if sum.abs() > CONTRAST_SUM_TOL {
                return Err(Error::NotAContrast { column: k + 1, sum });
            }
        }
        for (i, row) in q.row_iter().enumerate() {
            if row.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroRow { row: i + 1 });
            }
        }
        Ok(Self { q })
    }

    /// Builds a system from row-major coefficients.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let v = rows.len();
        let s = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != s) {
            return Err(Error::MalformedInput(format!(
                "row {} has {} entries, expected {s}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(v, s, |i, j| rows[i][j]))
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Number of treatments.
    pub fn v(&self) -> usize {
        self.q.nrows()
    }

    /// Number of contrasts.
    pub fn s(&self) -> usize {
        self.q.ncols()
    }

    /// `Q Q^T`, the unweighted Laplacian for pairwise systems.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.q * self.q.transpose()
    }

    /// `sum_k q_ik^2` for every treatment `i`.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        self.q
            .row_iter()
            .map(|r| r.iter().map(|x| x * x).sum())
            .collect()
    }

    pub fn rank(&self, tol: f64) -> usize {
        rank_of(self, tol)
    }
}

/// Parses the contrast CSV format: one row per treatment, comma-separated
/// decimal literals, no header. Blank lines are ignored.
pub fn parse_contrast_matrix(text: &str) -> Result<ContrastSystem> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>().map_err(|_| {
                    Error::MalformedInput(format!("line {}: not a number: {tok:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedInput("empty contrast matrix".into()));
    }
    ContrastSystem::from_rows(&rows)
}

/// Parses the edge-list format: a `v=<n>` header followed by one `j i` line
/// per comparison `tau_j - tau_i`, 1-indexed.
pub fn parse_edge_list(text: &str) -> Result<ComparisonGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MalformedInput("empty edge list".into()))?;
    let v = header
        .strip_prefix("v=")
        .and_then(|n| n.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::MalformedInput(format!("expected `v=<n>` header, got {header:?}")))?;
    let mut edges = Vec::new();
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let parsed: Option<Vec<usize>> = toks.iter().map(|t| t.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[j, i]) if j >= 1 && i >= 1 => edges.push((j - 1, i - 1)),
            _ => {
                return Err(Error::MalformedInput(format!(
                    "line {lineno}: expected `j i` with 1-indexed vertices, got {line:?}"
                )))
            }
        }
    }
    ComparisonGraph::new(v, edges)
}

/// Recognises a pairwise-comparison system and returns its graph.
///
/// Entries are compared exactly against `{-1, 0, 1}`. Systems that repeat a
/// comparison (in either orientation) are not representable as a simple
/// graph and yield `None`.
pub fn detect_pairwise(sys: &ContrastSystem) -> Option<ComparisonGraph> {
    let q = sys.q();
    let mut edges = Vec::with_capacity(sys.s());
    for col in q.column_iter() {
        let mut plus = None;
        let mut minus = None;
        for (i, &x) in col.iter().enumerate() {
            if x == 1.0 {
                if plus.replace(i).is_some() {
                    return None;
                }
            } else if x == -1.0 {
                if minus.replace(i).is_some() {
                    return None;
                }
            } else if x != 0.0 {
                return None;
            }
        }
        edges.push((plus?, minus?));
    }
    ComparisonGraph::new(sys.v(), edges).ok()
}

/// Numeric rank: eigenvalues of `Q^T Q` above `tol * lambda_max`.
pub fn rank_of(sys: &ContrastSystem, tol: f64) -> usize {
    let qtq = sys.q().transpose() * sys.q();
    let spec = eigenvalues_sym(&qtq).expect("Q^T Q is symmetric by construction");
    spec.count_above(tol)
}

/// Directed graph of a pairwise system. Edge `(j, i)` is the comparison
/// `tau_j - tau_i`, directed from `j` to `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonGraph {
    v: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl ComparisonGraph {
    /// Rejects loops, repeated unordered pairs and out-of-range vertices.
    pub fn new(v: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if v < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 vertices, got {v}"
            )));
        }
        if edges.is_empty() {
            return Err(Error::InvalidGraph("graph has no edges".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut degrees = vec![0; v];
        for &(j, i) in &edges {
            if j >= v || i >= v {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for v={v}",
                    j + 1,
                    i + 1
                )));
            }
            if j == i {
                return Err(Error::InvalidGraph(format!("loop at vertex {}", j + 1)));
            }
            if !seen.insert((j.min(i), j.max(i))) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate comparison between {} and {}",
                    j + 1,
                    i + 1
                )));
            }
            degrees[j] += 1;
            degrees[i] += 1;
        }
        Ok(Self { v, edges, degrees })
    }

    /// Same as [`ComparisonGraph::new`] with 1-indexed `(j, i)` pairs.
    pub fn from_one_indexed(v: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let edges = edges
            .iter()
            .map(|&(j, i)| {
                if j == 0 || i == 0 {
                    Err(Error::InvalidGraph("vertices are 1-indexed".into()))
                } else {
                    Ok((j - 1, i - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(v, edges)
    }

    pub fn v(&self) -> usize {
        self.v
    }

    /// Number of edges (contrasts).
    pub fn s(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `R_{i,e} = +1` if `e` leaves `i`, `-1` if it enters `i`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.v, self.edges.len());
        for (e, &(j, i)) in self.edges.iter().enumerate() {
            r[(j, e)] = 1.0;
            r[(i, e)] = -1.0;
        }
        r
    }

    /// Validated contrast system with `Q = R`.
    pub fn to_system(&self) -> Result<ContrastSystem> {
        ContrastSystem::new(self.incidence_matrix())
    }

    /// Adjacency lists of `(neighbour, edge index)`, in edge order.
    pub fn incident(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.v];
        for (e, &(j, i)) in self.edges.iter().enumerate() {
            adj[j].push((i, e));
            adj[i].push((j, e));
        }
        adj
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.edges
            .iter()
            .any(|&(j, i)| (j == a && i == b) || (j == b && i == a))
    }

    /// Copy with edge `e` reversed.
    pub fn with_edge_reversed(&self, e: usize) -> Self {
        let mut g = self.clone();
        let (j, i) = g.edges[e];
        g.edges[e] = (i, j);
        g
    }

    /// Component index per vertex, numbered in order of lowest member.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let adj = self.incident();
        let mut comp = vec![usize::MAX; self.v];
        let mut count = 0;
        for start in 0..self.v {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(x, _) in &adj[u] {
                    if comp[x] == usize::MAX {
                        comp[x] = count;
                        queue.push_back(x);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Breadth-first 2-colouring, each component rooted at its lowest
    /// vertex with colour 0. `None` if an odd cycle exists.
    pub fn two_coloring(&self) -> Option<Vec<u8>> {
        let adj = self.incident();
        let mut color: Vec<Option<u8>> = vec![None; self.v];
        for start in 0..self.v {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(0);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let cu = color[u].unwrap();
                for &(x, _) in &adj[u] {
                    match color[x] {
                        None => {
                            color[x] = Some(1 - cu);
                            queue.push_back(x);
                        }
                        Some(cx) if cx == cu => return None,
                        Some(_) => {}
                    }
                }
            }
        }
        Some(color.into_iter().map(Option::unwrap).collect())
    }

    pub fn classify(&self) -> GraphClassification {
        let (_, component_count) = self.components();
        let is_connected = component_count == 1;
        let bipartition = self.two_coloring();
        let sink_source_signs = bipartition.as_ref().map(|color| {
            self.edges
                .iter()
                .map(|&(j, _)| if color[j] == 0 { 1 } else { -1 })
                .collect()
        });
        GraphClassification {
            is_pairwise: true,
            is_connected,
            component_count,
            is_tree: is_connected && self.s() == self.v - 1,
            bipartition,
            sink_source_signs,
        }
    }
}

/// Structural facts about a comparison graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphClassification {
    pub is_pairwise: bool,
    pub is_connected: bool,
    pub component_count: usize,
    pub is_tree: bool,
    /// Colour (0 or 1) per vertex when the graph has no odd cycle.
    pub bipartition: Option<Vec<u8>>,
    /// `+1` for edges leaving colour class 0, `-1` otherwise. Reversing
    /// every `-1` edge turns each vertex into a sink or a source.
    pub sink_source_signs: Option<Vec<i8>>,
}
