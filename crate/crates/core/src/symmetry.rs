//! Treatment permutations that leave `Q Q^T` invariant.
//!
//! If `P Q Q^T P^T = Q Q^T`, relabelling a design by `P` does not change any
//! orthogonally invariant criterion. A single-cycle invariant permutation
//! makes the uniform design optimal; in general some optimal design is
//! constant on each cycle.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::contrasts::ContrastSystem;
use crate::error::{Error, Result};
use crate::spectral::Design;

const INVARIANCE_TOL: f64 = 1e-10;

/// Default bound on `v` for the exhaustive cyclic search.
pub const DEFAULT_MAX_V: usize = 9;

/// A bijection on `{0, .., v-1}`; `mapping[i] = pi(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let v = mapping.len();
        if v == 0 {
            return Err(Error::InvalidPermutation("empty mapping".into()));
        }
        let mut hit = vec![false; v];
        for &m in &mapping {
            if m >= v {
                return Err(Error::InvalidPermutation(format!(
                    "image {} out of range 1..={v}",
                    m + 1
                )));
            }
            if std::mem::replace(&mut hit[m], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{} appears twice; not a bijection",
                    m + 1
                )));
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(v: usize) -> Self {
        Self {
            mapping: (0..v).collect(),
        }
    }

    /// One-line notation with 1-indexed images: `"2 1 3"` is `pi(1)=2,
    /// pi(2)=1, pi(3)=3`.
    pub fn parse_one_line(text: &str) -> Result<Self> {
        let mapping = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| match t.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n - 1),
                _ => Err(Error::InvalidPermutation(format!("bad image {t:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mapping)
    }

    /// The single cycle `(c_0, c_1, ..., c_{k-1})` on `v` points, fixing the rest.
    pub fn from_cycle(v: usize, cycle: &[usize]) -> Result<Self> {
        let mut mapping: Vec<usize> = (0..v).collect();
        for (k, &c) in cycle.iter().enumerate() {
            if c >= v {
                return Err(Error::InvalidPermutation(format!("{} out of range", c + 1)));
            }
            mapping[c] = cycle[(k + 1) % cycle.len()];
        }
        Self::new(mapping)
    }

    pub fn v(&self) -> usize {
        self.mapping.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    /// 1-indexed images.
    pub fn one_line(&self) -> Vec<usize> {
        self.mapping.iter().map(|m| m + 1).collect()
    }

    /// Cycle decomposition; each cycle starts at its smallest element and the
    /// cycles are ordered by that element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.v()];
        let mut out = Vec::new();
        for start in 0..self.v() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut x = self.mapping[start];
            while x != start {
                seen[x] = true;
                cycle.push(x);
                x = self.mapping[x];
            }
            out.push(cycle);
        }
        out
    }

    /// True when the permutation is a single cycle through all points.
    pub fn is_cyclic(&self) -> bool {
        self.cycles().len() == 1
    }

    /// `P_pi`, with `(P_pi x)_{pi(i)} = x_i`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.v(), self.v());
        for (i, &m) in self.mapping.iter().enumerate() {
            p[(m, i)] = 1.0;
        }
        p
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation, 1-indexed, e.g. `(1,2)(3,4,5)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cycle in self.cycles() {
            let items: Vec<String> = cycle.iter().map(|c| (c + 1).to_string()).collect();
            write!(f, "({})", items.join(","))?;
        }
        Ok(())
    }
}

/// Checks `P_pi Q Q^T P_pi^T = Q Q^T` entrywise.
pub fn check_invariance(sys: &ContrastSystem, perm: &Permutation) -> bool {
    if perm.v() != sys.v() {
        return false;
    }
    let a = sys.gram();
    let v = sys.v();
    (0..v).all(|i| {
        (0..v).all(|j| (a[(perm.apply(i), perm.apply(j))] - a[(i, j)]).abs() <= INVARIANCE_TOL)
    })
}

/// `P_pi w`: the weight of treatment `i` moves to `pi(i)`.
pub fn permute_design(d: &Design, perm: &Permutation) -> Result<Design> {
    if perm.v() != d.v() {
        return Err(Error::InvalidArgument(format!(
            "permutation on {} points applied to a design on {}",
            perm.v(),
            d.v()
        )));
    }
    let mut w = vec![0.0; d.v()];
    for (i, &x) in d.weights().iter().enumerate() {
        w[perm.apply(i)] = x;
    }
    Design::new(w)
}

/// Searches all single-cycle permutations for one satisfying the invariance
/// identity. Candidates are built in lexicographic order of the cycle
/// starting at vertex 1, so the result is deterministic.
pub fn find_cyclic_invariance(sys: &ContrastSystem, max_v: usize) -> Result<Option<Permutation>> {
    let v = sys.v();
    if v > max_v {
        return Err(Error::TooLarge(format!(
            "exhaustive cyclic search is limited to v <= {max_v}, got v = {v}; supply a permutation"
        )));
    }
    let a = sys.gram();

    // A single cycle maps every row onto every other row, so all rows must
    // carry the same multiset of entries.
    let sorted_rows: Vec<Vec<f64>> = a
        .row_iter()
        .map(|r| {
            let mut x: Vec<f64> = r.iter().copied().collect();
            x.sort_by(f64::total_cmp);
            x
        })
        .collect();
    let same = sorted_rows.iter().all(|r| {
        r.iter()
            .zip(&sorted_rows[0])
            .all(|(x, y)| (x - y).abs() <= INVARIANCE_TOL)
    });
    if !same {
        return Ok(None);
    }

    let mut search = CycleSearch {
        a: &a,
        pi: vec![None; v],
        used: vec![false; v],
        order: vec![0],
    };
    search.used[0] = true;
    Ok(search.extend().then(|| {
        Permutation::new(search.pi.iter().map(|x| x.unwrap()).collect())
            .expect("search builds a bijection")
    }))
}

struct CycleSearch<'a> {
    a: &'a DMatrix<f64>,
    pi: Vec<Option<usize>>,
    used: Vec<bool>,
    order: Vec<usize>,
}

impl CycleSearch<'_> {
    fn consistent(&self, x: usize, y: usize) -> bool {
        self.pi.iter().enumerate().all(|(z, pz)| match pz {
            Some(pz) => (self.a[(y, *pz)] - self.a[(x, z)]).abs() <= INVARIANCE_TOL,
            None => true,
        }) && (self.a[(y, y)] - self.a[(x, x)]).abs() <= INVARIANCE_TOL
    }

    fn extend(&mut self) -> bool {
        let v = self.pi.len();
        let last = *self.order.last().unwrap();
        if self.order.len() == v {
            if self.consistent(last, self.order[0]) {
                self.pi[last] = Some(self.order[0]);
                return true;
            }
            return false;
        }
        for next in 0..v {
            if self.used[next] || !self.consistent(last, next) {
                continue;
            }
            self.pi[last] = Some(next);
            self.used[next] = true;
            self.order.push(next);
            if self.extend() {
                return true;
            }
            self.order.pop();
            self.used[next] = false;
            self.pi[last] = None;
        }
        false
    }
}

/// Partition of the treatments into the cycles of an invariant permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrbitReduction {
    pub orbit_of: Vec<usize>,
    pub orbit_count: usize,
}

impl OrbitReduction {
    /// One orbit per treatment; no constraint.
    pub fn trivial(v: usize) -> Self {
        Self {
            orbit_of: (0..v).collect(),
            orbit_count: v,
        }
    }

    pub fn v(&self) -> usize {
        self.orbit_of.len()
    }

    pub fn orbit_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.orbit_count];
        for &k in &self.orbit_of {
            sizes[k] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.orbit_count];
        for (i, &k) in self.orbit_of.iter().enumerate() {
            out[k].push(i);
        }
        out
    }

    /// Replaces each weight by its orbit average.
    pub fn symmetrize(&self, w: &[f64]) -> Vec<f64> {
        let sizes = self.orbit_sizes();
        let mut sums = vec![0.0; self.orbit_count];
        for (i, &k) in self.orbit_of.iter().enumerate() {
            sums[k] += w[i];
        }
        self.orbit_of
            .iter()
            .map(|&k| sums[k] / sizes[k] as f64)
            .collect()
    }

    pub fn is_constant_on_orbits(&self, w: &[f64], tol: f64) -> bool {
        let avg = self.symmetrize(w);
        w.iter().zip(&avg).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Orbits of an invariant permutation.
pub fn orbit_reduction(sys: &ContrastSystem, perm: &Permutation) -> Result<OrbitReduction> {
    if !check_invariance(sys, perm) {
        return Err(Error::NotInvariant);
    }
    let cycles = perm.cycles();
    let mut orbit_of = vec![0; perm.v()];
    for (k, cycle) in cycles.iter().enumerate() {
        for &i in cycle {
            orbit_of[i] = k;
        }
    }
    Ok(OrbitReduction {
        orbit_of,
        orbit_count: cycles.len(),
    })
}
