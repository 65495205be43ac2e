//! Numerical `Phi_p` optimisation, the E-optimality certificate and a
//! brute-force lattice oracle.
//!
//! The optimiser works on the formal Laplacian `L = M^{-1/2} Q Q^T M^{-1/2}`,
//! whose top `r` eigenvalues are those of `V_Q(w)`, with
//! `d lambda_j / d w_i = -lambda_j x_ji^2 / w_i`. It runs a spectral projected
//! gradient method (Barzilai-Borwein steps, nonmonotone Armijo backtracking)
//! on the floored simplex. `p = -inf` is handled by minimising
//! `t^{-1} log sum_j lambda_j^t` for an increasing sequence of `t`, which is
//! a log-sum-exp of the log-eigenvalues at temperature `1/t`.

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::a_optimal;
use crate::contrasts::{ContrastSystem, DEFAULT_RANK_TOL};
use crate::criteria::{value_from_eigenvalues, CriterionP, CriterionValue, Evaluator};
use crate::error::{Error, Result};
use crate::spectral::{eigen_sym, v_matrix, Design};
use crate::symmetry::OrbitReduction;

/// Relative eigenvalue gap below which `lambda_max` counts as repeated.
pub const DEGENERACY_TOL: f64 = 1e-4;
const NONMONOTONE_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e12;
/// Exponents `t` used to approach `lambda_max`.
const SMOOTHING_SCHEDULE: [f64; 8] = [8.0, 32.0, 128.0, 512.0, 2048.0, 8192.0, 32768.0, 131072.0];

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Stationarity tolerance on the projected gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound on every weight.
    pub floor: f64,
    /// Restrict to designs constant on these orbits.
    pub orbits: Option<OrbitReduction>,
    /// Jitters the starting design when set.
    pub seed: Option<u64>,
    /// Starting design; defaults to uniform, or A-optimal when `p < -1`.
    pub start: Option<Design>,
    pub rank_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            floor: 1e-9,
            orbits: None,
            seed: None,
            start: None,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub design: Design,
    pub criterion: CriterionValue,
    pub iterations: usize,
    pub converged: bool,
    pub certificate: Option<CertificateReport>,
}

/// Rank-one check of the E-optimality equivalence condition with
/// `G = M^{-1}(w)` and `E = h h^T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    /// `((Q h)_i / w_i)^2`, the left-hand side at the vertex design `e_i`.
    pub lhs: Vec<f64>,
    pub lhs_max: f64,
    /// `lambda_max(V_Q(w))`.
    pub rhs: f64,
    pub gap: f64,
    /// 0-indexed vertex attaining `lhs_max`.
    pub witness_vertex: usize,
    /// `h`, first nonzero entry positive.
    pub eigvec: Vec<f64>,
    /// `lambda_max` is numerically repeated; a rank-one `E` may then fail to
    /// certify an optimal design.
    pub degenerate: bool,
}

impl CertificateReport {
    pub fn certifies(&self, tol: f64) -> bool {
        self.gap <= tol
    }
}

/// Evaluates the certificate at `d`. Since the left-hand side is linear in
/// the competing design, checking the vertex designs suffices.
pub fn e_certificate(sys: &ContrastSystem, d: &Design) -> Result<CertificateReport> {
    if d.v() != sys.v() {
        return Err(Error::InfeasibleDesign(format!(
            "{} weights for {} treatments",
            d.v(),
            sys.v()
        )));
    }
    let eig = eigen_sym(&v_matrix(sys, d)?)?;
    let rhs = eig.values[0];
    let mut h = eig.vectors.column(0).into_owned();
    if let Some(first) = h.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            h.neg_mut();
        }
    }
    let qh = sys.q() * &h;
    let lhs: Vec<f64> = qh
        .iter()
        .zip(d.weights())
        .map(|(u, w)| (u / w).powi(2))
        .collect();
    let (witness_vertex, lhs_max) =
        lhs.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, x)| {
                if x > best.1 {
                    (i, x)
                } else {
                    best
                }
            });
    let degenerate = eig.values.len() > 1 && rhs - eig.values[1] <= DEGENERACY_TOL * rhs.abs();
    Ok(CertificateReport {
        lhs,
        lhs_max,
        rhs,
        gap: lhs_max - rhs,
        witness_vertex,
        eigvec: h.iter().copied().collect(),
        degenerate,
    })
}

/// Smooth surrogate minimised by one SPG run.
#[derive(Debug, Clone, Copy)]
enum Surrogate {
    /// `r^{-1} sum log lambda_j`.
    MeanLog,
    /// `t^{-1} log sum lambda_j^t`, `t > 0`.
    LogNorm(f64),
}

struct Problem<'a> {
    gram: &'a DMatrix<f64>,
    rank: usize,
    orbit_of: &'a [usize],
    sizes: Vec<f64>,
}

impl Problem<'_> {
    fn weights(&self, m: &[f64]) -> Vec<f64> {
        self.orbit_of
            .iter()
            .map(|&k| m[k] / self.sizes[k])
            .collect()
    }

    /// Top `r` eigenpairs of the formal Laplacian, nonincreasing.
    fn top_eigen(&self, w: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let v = w.len();
        let root: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let l = DMatrix::from_fn(v, v, |i, j| self.gram[(i, j)] / (root[i] * root[j]));
        let eig = l.symmetric_eigen();
        let mut order: Vec<usize> = (0..v).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        order.truncate(self.rank);
        let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let vectors = order
            .iter()
            .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
            .collect();
        (values, vectors)
    }

    fn lambda_max(&self, m: &[f64]) -> f64 {
        self.top_eigen(&self.weights(m)).0[0]
    }

    /// Surrogate value and gradient with respect to the orbit masses.
    fn eval(&self, m: &[f64], kind: Surrogate) -> Option<(f64, Vec<f64>)> {
        let w = self.weights(m);
        let (lam, x) = self.top_eigen(&w);
        if !lam.iter().all(|&l| l > 0.0 && l.is_finite()) {
            return None;
        }
        // coefficients c_j with f = sum-form, df = sum_j c_j dlambda_j / lambda_j
        let (f, coef) = match kind {
            Surrogate::MeanLog => {
                let r = lam.len() as f64;
                let f = lam.iter().map(|l| l.ln()).sum::<f64>() / r;
                (f, vec![1.0 / r; lam.len()])
            }
            Surrogate::LogNorm(t) => {
                let top = lam[0];
                let scaled: Vec<f64> = lam.iter().map(|l| (l / top).powf(t)).collect();
                let total: f64 = scaled.iter().sum();
                let f = top.ln() + total.ln() / t;
                (f, scaled.iter().map(|s| s / total).collect())
            }
        };
        let mut gw = vec![0.0; w.len()];
        for (c, xj) in coef.iter().zip(&x) {
            for i in 0..w.len() {
                gw[i] -= c * xj[i] * xj[i] / w[i];
            }
        }
        let mut gm = vec![0.0; m.len()];
        for (i, &k) in self.orbit_of.iter().enumerate() {
            gm[k] += gw[i] / self.sizes[k];
        }
        Some((f, gm))
    }
}

/// Euclidean projection onto `{x : x >= lb, sum x = 1}`.
fn project(y: &[f64], lb: &[f64]) -> Vec<f64> {
    let mass = 1.0 - lb.iter().sum::<f64>();
    let z: Vec<f64> = y.iter().zip(lb).map(|(a, b)| a - b).collect();
    let mut sorted = z.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - mass) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    z.iter()
        .zip(lb)
        .map(|(zi, b)| (zi - theta).max(0.0) + b)
        .collect()
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Run {
    m: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Spectral projected gradient; `on_iterate` sees every accepted point.
fn spg(
    prob: &Problem<'_>,
    kind: Surrogate,
    start: Vec<f64>,
    lb: &[f64],
    tol: f64,
    budget: usize,
    mut on_iterate: impl FnMut(&[f64]),
) -> Result<Run> {
    let mut m = project(&start, lb);
    let (mut f, mut g) = prob
        .eval(&m, kind)
        .ok_or_else(|| Error::InfeasibleStart("criterion undefined at start".into()))?;
    let pg = |m: &[f64], g: &[f64]| {
        let y: Vec<f64> = m.iter().zip(g).map(|(a, b)| a - b).collect();
        inf_norm_diff(&project(&y, lb), m)
    };
    let mut step = (1.0 / pg(&m, &g).max(1e-300)).clamp(STEP_MIN, STEP_MAX);
    let mut history = vec![f];
    let mut iterations = 0;
    on_iterate(&m);

    while iterations < budget {
        if pg(&m, &g) <= tol {
            return Ok(Run {
                m,
                iterations,
                converged: true,
            });
        }
        iterations += 1;
        let trial: Vec<f64> = m.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let dir: Vec<f64> = project(&trial, lb)
            .iter()
            .zip(&m)
            .map(|(p, x)| p - x)
            .collect();
        let slope = dot(&g, &dir);
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut lambda = 1.0;
        let accepted = loop {
            let cand: Vec<f64> = m.iter().zip(&dir).map(|(x, d)| x + lambda * d).collect();
            if let Some((fc, gc)) = prob.eval(&cand, kind) {
                if fc <= reference + ARMIJO * lambda * slope {
                    break Some((cand, fc, gc));
                }
            }
            lambda *= 0.5;
            if lambda < 1e-16 {
                break None;
            }
        };
        let Some((next, fn_, gn)) = accepted else {
            // no descent at machine precision
            let converged = pg(&m, &g) <= tol.sqrt();
            return Ok(Run {
                m,
                iterations,
                converged,
            });
        };

        let s: Vec<f64> = next.iter().zip(&m).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX
        };
        m = next;
        f = fn_;
        g = gn;
        on_iterate(&m);
        history.push(f);
        if history.len() > NONMONOTONE_MEMORY {
            history.remove(0);
        }
    }
    Ok(Run {
        m,
        iterations,
        converged: false,
    })
}

fn starting_design(
    sys: &ContrastSystem,
    p: CriterionP,
    opts: &OptimizeOptions,
) -> Result<Vec<f64>> {
    let v = sys.v();
    let mut w = match &opts.start {
        Some(d) => {
            if d.v() != v {
                return Err(Error::InfeasibleStart(format!(
                    "{} weights for {v} treatments",
                    d.v()
                )));
            }
            if d.weights().iter().any(|&x| x < opts.floor) {
                return Err(Error::InfeasibleStart(format!(
                    "a weight lies below the floor {}",
                    opts.floor
                )));
            }
            d.weights().to_vec()
        }
        None => {
            let warm = match p {
                CriterionP::NegInf => true,
                CriterionP::Finite(q) => q < -1.0,
            };
            if warm {
                a_optimal(sys)?.design.into_inner()
            } else {
                Design::uniform(v).into_inner()
            }
        }
    };
    if let Some(seed) = opts.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &mut w {
            *x *= (0.1 * rng.random_range(-1.0..1.0f64)).exp();
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
    }
    Ok(w)
}

/// Minimises `Psi_p` over `{w : w_i >= floor, sum w = 1}`, optionally
/// restricted to designs constant on orbits.
///
/// Returns [`Error::NotConverged`] carrying the best iterate when the
/// iteration budget runs out.
pub fn optimize_phi_p(
    sys: &ContrastSystem,
    p: CriterionP,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    let v = sys.v();
    if opts.floor.is_nan() || opts.floor <= 0.0 || opts.floor * v as f64 >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "floor {} must be positive and below 1/v",
            opts.floor
        )));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tol {} must be positive",
            opts.tol
        )));
    }
    let orbits = match &opts.orbits {
        Some(o) if o.v() != v => {
            return Err(Error::InvalidArgument(format!(
                "orbit reduction on {} points for {v} treatments",
                o.v()
            )))
        }
        Some(o) => o.clone(),
        None => OrbitReduction::trivial(v),
    };
    let evaluator = Evaluator::with_rank_tol(sys, opts.rank_tol);
    let gram = sys.gram();
    let sizes: Vec<f64> = orbits.orbit_sizes().iter().map(|&c| c as f64).collect();
    let prob = Problem {
        gram: &gram,
        rank: evaluator.rank(),
        orbit_of: &orbits.orbit_of,
        sizes: sizes.clone(),
    };
    let lb: Vec<f64> = sizes.iter().map(|c| c * opts.floor).collect();

    let w0 = orbits.symmetrize(&starting_design(sys, p, opts)?);
    let mut m0 = vec![0.0; orbits.orbit_count];
    for (i, &k) in orbits.orbit_of.iter().enumerate() {
        m0[k] += w0[i];
    }

    let (m, iterations, converged) = match p {
        CriterionP::Finite(q) => {
            let kind = if q == 0.0 {
                Surrogate::MeanLog
            } else {
                Surrogate::LogNorm(-q)
            };
            let run = spg(&prob, kind, m0, &lb, opts.tol, opts.max_iter, |_| {})?;
            (run.m, run.iterations, run.converged)
        }
        CriterionP::NegInf => {
            let mut best = project(&m0, &lb);
            let mut best_value = prob.lambda_max(&best);
            let mut current = best.clone();
            let mut used = 0;
            let mut converged = true;
            for t in SMOOTHING_SCHEDULE {
                let run = spg(
                    &prob,
                    Surrogate::LogNorm(t),
                    current,
                    &lb,
                    opts.tol,
                    opts.max_iter - used,
                    |m| {
                        let value = prob.lambda_max(m);
                        if value < best_value {
                            best_value = value;
                            best = m.to_vec();
                        }
                    },
                )?;
                used += run.iterations;
                current = run.m;
                if !run.converged {
                    converged = false;
                    if used >= opts.max_iter {
                        break;
                    }
                }
            }
            (best, used, converged)
        }
    };

    let design = Design::from_unnormalized(prob.weights(&m))?;
    let criterion = evaluator.evaluate(&design, p)?;
    let certificate = if p.is_neg_inf() {
        Some(e_certificate(sys, &design)?)
    } else {
        None
    };
    let result = OptimizationResult {
        design,
        criterion,
        iterations,
        converged,
        certificate,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

/// Lattice minimiser found by [`grid_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub design: Design,
    pub criterion: CriterionValue,
    pub step: f64,
    pub points: usize,
    /// Every lattice point whose value ties with the minimum (relative
    /// `GRID_TIE_TOL`), `design` included, in lexicographic order.
    pub ties: Vec<Design>,
}

/// Largest `v` accepted by [`grid_oracle`].
pub const GRID_MAX_V: usize = 4;

/// Relative tolerance under which two lattice values count as equal.
pub const GRID_TIE_TOL: f64 = 1e-12;

struct Candidate {
    psi: f64,
    spectrum: [f64; GRID_MAX_V],
    n: Vec<usize>,
}

/// Exhaustive search over `{w : w_i = n_i step, n_i >= 1, sum w = 1}`.
///
/// The minimum of `Psi_p` is often attained on a whole face of the lattice
/// (for `p = -inf` whenever one eigenvalue depends on a single weight). Among
/// tied points the one with the lexicographically smallest nonincreasing
/// spectrum is reported, then the smallest `n`; all tied points are listed.
pub fn grid_oracle(sys: &ContrastSystem, p: CriterionP, step: f64) -> Result<GridOptimum> {
    let v = sys.v();
    if v > GRID_MAX_V {
        return Err(Error::TooLarge(format!(
            "grid oracle is limited to v <= {GRID_MAX_V}, got v = {v}"
        )));
    }
    if !(1e-3..=0.1).contains(&step) {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} outside [0.001, 0.1]"
        )));
    }
    let n_total = (1.0 / step).round();
    if (n_total * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} does not divide 1"
        )));
    }
    let n_total = n_total as usize;
    if n_total < v {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} too coarse for v = {v}"
        )));
    }
    let evaluator = Evaluator::new(sys);
    let rank = evaluator.rank();
    let gram = sys.gram();
    let mut a = Matrix4::<f64>::zeros();
    for i in 0..v {
        for j in 0..v {
            a[(i, j)] = gram[(i, j)];
        }
    }

    let score = |n: &[usize]| -> Candidate {
        let mut l = Matrix4::<f64>::zeros();
        for i in 0..v {
            for j in 0..v {
                l[(i, j)] = a[(i, j)] * n_total as f64 / ((n[i] * n[j]) as f64).sqrt();
            }
        }
        let mut spectrum = [0.0; GRID_MAX_V];
        spectrum.copy_from_slice(l.symmetric_eigenvalues().as_slice());
        spectrum.sort_by(|x, y| y.total_cmp(x));
        let psi = value_from_eigenvalues(&spectrum, rank, p).map_or(f64::INFINITY, |c| c.psi);
        Candidate {
            psi,
            spectrum,
            n: n.to_vec(),
        }
    };
    let tied = |x: f64, min: f64| x <= min + GRID_TIE_TOL * min.abs();

    // each chunk keeps the points tying with its own minimum, a superset of
    // the global ties restricted to the chunk
    let chunks: Vec<(usize, f64, Vec<Candidate>)> = (1..=n_total - (v - 1))
        .into_par_iter()
        .map(|n0| {
            let mut n = vec![0; v];
            n[0] = n0;
            let mut min = f64::INFINITY;
            let mut keep: Vec<Candidate> = Vec::new();
            let mut points = 0usize;
            scan(&mut n, 1, n_total - n0, &mut |n| {
                points += 1;
                let cand = score(n);
                if cand.psi < min {
                    min = cand.psi;
                    keep.retain(|c| tied(c.psi, min));
                }
                if tied(cand.psi, min) {
                    keep.push(cand);
                }
            });
            (points, min, keep)
        })
        .collect();

    let points = chunks.iter().map(|c| c.0).sum();
    let min = chunks.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NumericalCheck(
            "no lattice point has a finite value".into(),
        ));
    }
    let ties: Vec<Candidate> = chunks
        .into_iter()
        .flat_map(|c| c.2)
        .filter(|c| tied(c.psi, min))
        .collect();
    let best = ties
        .iter()
        .min_by(|x, y| {
            x.spectrum
                .iter()
                .zip(&y.spectrum)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| x.n.cmp(&y.n))
        })
        .expect("at least one lattice point");

    let to_design =
        |n: &[usize]| Design::from_unnormalized(n.iter().map(|&k| k as f64 * step).collect());
    let design = to_design(&best.n)?;
    let criterion = evaluator.evaluate(&design, p)?;
    Ok(GridOptimum {
        design,
        criterion,
        step,
        points,
        ties: ties
            .iter()
            .map(|c| to_design(&c.n))
            .collect::<Result<_>>()?,
    })
}

/// Visits every `n[k..]` with entries `>= 1` summing to `left`.
fn scan(n: &mut [usize], k: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
    if k + 1 == n.len() {
        n[k] = left;
        visit(n);
        return;
    }
    let rest = n.len() - k - 1;
    for x in 1..=left - rest {
        n[k] = x;
        scan(n, k + 1, left - x, visit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{a_optimal, e_optimal_bipartite};
    use crate::contrasts::{detect_pairwise, parse_contrast_matrix, ComparisonGraph};
    use crate::families;
    use crate::symmetry::{orbit_reduction, Permutation};

    const Q1_CSV: &str = "-1,0,0,0,0,0\n1,-1,0,0,0,0\n0,1,-1,-1,0,0\n0,0,1,0,0,0\n0,0,0,1,-1,-1\n0,0,0,0,1,0\n0,0,0,0,0,1\n";

    fn q1() -> ContrastSystem {
        parse_contrast_matrix(Q1_CSV).unwrap()
    }

    fn triangle_pendant() -> ContrastSystem {
        ComparisonGraph::from_one_indexed(4, &[(1, 2), (2, 3), (3, 1), (1, 4)])
            .unwrap()
            .to_system()
            .unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        inf_norm_diff(a, b)
    }

    #[test]
    fn projection_respects_floor() {
        let lb = [0.1, 0.1, 0.1];
        let x = project(&[2.0, -1.0, 0.3], &lb);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(x.iter().zip(&lb).all(|(a, b)| a >= b));
        assert_eq!(project(&[0.2, 0.3, 0.5], &[0.0; 3]), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn a_optimal_recovered() {
        let sys = q1();
        let res = optimize_phi_p(&sys, CriterionP::A, &OptimizeOptions::default()).unwrap();
        let exact = a_optimal(&sys).unwrap();
        assert!(res.converged);
        assert!(max_diff(res.design.weights(), exact.design.weights()) < 1e-6);
    }

    #[test]
    fn e_optimal_recovered() {
        let sys = q1();
        let res = optimize_phi_p(&sys, CriterionP::E, &OptimizeOptions::default()).unwrap();
        let exact = e_optimal_bipartite(&detect_pairwise(&sys).unwrap()).unwrap();
        assert!(
            max_diff(res.design.weights(), exact.design.weights()) < 1e-4,
            "{:?}",
            res.design
        );
        assert!((res.criterion.psi - 24.0).abs() < 1e-3);
        assert!(res.certificate.is_some());
    }

    #[test]
    fn triangle_pendant_beats_degree_rule() {
        let sys = triangle_pendant();
        let res = optimize_phi_p(&sys, CriterionP::E, &OptimizeOptions::default()).unwrap();
        assert!(res.criterion.psi <= 13.0435, "{}", res.criterion.psi);
    }

    #[test]
    fn matches_closed_forms() {
        let cases = vec![
            (
                families::path(4).unwrap().to_system().unwrap(),
                CriterionP::A,
            ),
            (families::centered(4).unwrap(), CriterionP::D),
            (
                families::cyclic_comparisons(5)
                    .unwrap()
                    .to_system()
                    .unwrap(),
                CriterionP::D,
            ),
            (families::average_vs_control(5).unwrap(), CriterionP::A),
        ];
        for (sys, p) in cases {
            let reference = if p == CriterionP::A {
                a_optimal(&sys).unwrap().criterion.psi
            } else {
                Evaluator::new(&sys)
                    .evaluate(&Design::uniform(sys.v()), p)
                    .unwrap()
                    .psi
            };
            let res = optimize_phi_p(&sys, p, &OptimizeOptions::default()).unwrap();
            assert!((res.criterion.psi - reference).abs() / reference <= 1e-5);
        }
    }

    #[test]
    fn orbit_constraint_keeps_optimum() {
        let sys = families::treatments_vs_controls(5, 2)
            .unwrap()
            .to_system()
            .unwrap();
        let perm = Permutation::parse_one_line("2 1 4 5 3").unwrap();
        let orbits = orbit_reduction(&sys, &perm).unwrap();
        for p in [
            CriterionP::D,
            CriterionP::A,
            CriterionP::finite(-2.0).unwrap(),
        ] {
            let free = optimize_phi_p(&sys, p, &OptimizeOptions::default()).unwrap();
            let opts = OptimizeOptions {
                orbits: Some(orbits.clone()),
                ..Default::default()
            };
            let reduced = optimize_phi_p(&sys, p, &opts).unwrap();
            assert!(orbits.is_constant_on_orbits(reduced.design.weights(), 1e-15));
            let rel = (reduced.criterion.psi - free.criterion.psi).abs() / free.criterion.psi;
            assert!(rel <= 1e-6, "p={p}: {rel}");
        }
    }

    #[test]
    fn deterministic_with_seed() {
        let sys = triangle_pendant();
        let opts = OptimizeOptions {
            seed: Some(42),
            ..Default::default()
        };
        let a = optimize_phi_p(&sys, CriterionP::finite(-0.5).unwrap(), &opts).unwrap();
        let b = optimize_phi_p(&sys, CriterionP::finite(-0.5).unwrap(), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_start() {
        let sys = triangle_pendant();
        let opts = OptimizeOptions {
            start: Some(Design::uniform(3)),
            ..Default::default()
        };
        assert!(matches!(
            optimize_phi_p(&sys, CriterionP::A, &opts),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn budget_exhaustion_reports_iterate() {
        let sys = q1();
        let opts = OptimizeOptions {
            max_iter: 2,
            ..Default::default()
        };
        match optimize_phi_p(&sys, CriterionP::finite(-3.0).unwrap(), &opts) {
            Err(Error::NotConverged(res)) => {
                assert!(!res.converged);
                assert_eq!(res.iterations, 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn certificate_examples() {
        let sys = q1();
        let d = e_optimal_bipartite(&detect_pairwise(&sys).unwrap())
            .unwrap()
            .design;
        let cert = e_certificate(&sys, &d).unwrap();
        assert!(cert.gap.abs() <= 1e-8);
        assert!(cert.lhs.iter().all(|x| (x - 24.0).abs() <= 1e-8));

        let edge = families::path(2).unwrap().to_system().unwrap();
        let cert = e_certificate(&edge, &Design::uniform(2)).unwrap();
        assert!((cert.lhs_max - 4.0).abs() < 1e-12 && (cert.rhs - 4.0).abs() < 1e-12);

        let tp = triangle_pendant();
        let cert =
            e_certificate(&tp, &Design::new(vec![0.375, 0.25, 0.25, 0.125]).unwrap()).unwrap();
        assert!(cert.gap > 1e-3);
    }

    #[test]
    fn certificate_linear_in_competitor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sys = triangle_pendant();
        for _ in 0..50 {
            let d =
                Design::from_unnormalized((0..4).map(|_| rng.random_range(0.05..1.0)).collect())
                    .unwrap();
            let cert = e_certificate(&sys, &d).unwrap();
            let competitor: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let total: f64 = competitor.iter().sum();
            let value: f64 = competitor
                .iter()
                .zip(&cert.lhs)
                .map(|(c, l)| c / total * l)
                .sum();
            assert!(value <= cert.lhs_max + 1e-10);
            // the design itself reproduces lambda_max
            let own: f64 = d.weights().iter().zip(&cert.lhs).map(|(w, l)| w * l).sum();
            assert!((own - cert.rhs).abs() <= 1e-10 * cert.rhs);
        }
    }

    #[test]
    fn grid_examples() {
        let path = families::path(3).unwrap().to_system().unwrap();
        let g = grid_oracle(&path, CriterionP::A, 0.005).unwrap();
        let r2 = 2f64.sqrt();
        let expect = [1.0 / (2.0 + r2), r2 / (2.0 + r2), 1.0 / (2.0 + r2)];
        assert!(max_diff(g.design.weights(), &expect) <= 0.005 + 1e-12);

        let c = families::average_vs_control(4).unwrap();
        let g = grid_oracle(&c, CriterionP::D, 0.01).unwrap();
        let expect = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        assert!(
            max_diff(g.design.weights(), &expect) <= 0.01 + 1e-12,
            "{g:?}"
        );

        let tp = triangle_pendant();
        let g = grid_oracle(&tp, CriterionP::E, 0.01).unwrap();
        assert!(g.criterion.psi <= 13.0435 + 0.05);
    }

    #[test]
    fn grid_bounds() {
        let big = families::path(5).unwrap().to_system().unwrap();
        assert!(matches!(
            grid_oracle(&big, CriterionP::D, 0.01),
            Err(Error::TooLarge(_))
        ));
        let path = families::path(3).unwrap().to_system().unwrap();
        assert!(grid_oracle(&path, CriterionP::D, 0.5).is_err());
        assert!(grid_oracle(&path, CriterionP::D, 0.003).is_err());
    }
}
