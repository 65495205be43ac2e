//! Dense linear algebra for designs: moment and variance matrices, the
//! vertex-weighted Laplacian, a cyclic Jacobi eigensolver, pseudo-inverse,
//! pseudo-determinant and first minors.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::contrasts::{rank_of, ComparisonGraph, ContrastSystem, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};

const DESIGN_SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Approximate design: strictly positive treatment proportions summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Design {
    w: Vec<f64>,
}

impl Design {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        check_positive(&w)?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > DESIGN_SUM_TOL {
            return Err(Error::InfeasibleDesign(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { w })
    }

    /// Rescales positive weights onto the simplex.
    pub fn from_unnormalized(w: Vec<f64>) -> Result<Self> {
        check_positive(&w)?;
        let sum: f64 = w.iter().sum();
        Ok(Self {
            w: w.into_iter().map(|x| x / sum).collect(),
        })
    }

    /// The uniform design `1_v / v`.
    pub fn uniform(v: usize) -> Self {
        Self {
            w: vec![1.0 / v as f64; v],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn v(&self) -> usize {
        self.w.len()
    }

    /// Vertex weights `alpha_i = 1 / w_i`.
    pub fn alphas(&self) -> Vec<f64> {
        self.w.iter().map(|x| 1.0 / x).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.w
    }
}

pub(crate) fn check_positive(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InfeasibleDesign("empty design".into()));
    }
    if let Some(i) = w.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InfeasibleDesign(format!(
            "weight {} is {}, all weights must be positive",
            i + 1,
            w[i]
        )));
    }
    Ok(())
}

fn check_dims(sys: &ContrastSystem, w: &[f64]) -> Result<()> {
    if sys.v() != w.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} weights for {} treatments",
            w.len(),
            sys.v()
        )));
    }
    Ok(())
}

/// Eigenvalues in nonincreasing order with the positivity threshold used to
/// count non-zero ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub tol: f64,
}

impl Spectrum {
    fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        Self {
            values,
            tol: DEFAULT_RANK_TOL * top,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues above `rel_tol * lambda_max`.
    pub fn count_above(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.max().max(0.0);
        self.values.iter().filter(|&&x| x > cut).count()
    }

    /// Eigenvalues above the stored threshold.
    pub fn positive(&self) -> &[f64] {
        let n = self.values.iter().take_while(|&&x| x > self.tol).count();
        &self.values[..n]
    }
}

/// Full symmetric eigendecomposition; `vectors` has unit eigenvectors as
/// columns in the same order as `values`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_values(self.values.clone())
    }
}

/// `M(w) = diag(w)`.
pub fn moment_matrix(d: &Design) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(d.weights()))
}

/// `V_Q(w) = Q^T M^{-1}(w) Q`.
pub fn v_matrix(sys: &ContrastSystem, d: &Design) -> Result<DMatrix<f64>> {
    v_matrix_raw(sys, d.weights())
}

/// `V_Q` for any positive weight vector, normalised or not.
pub fn v_matrix_raw(sys: &ContrastSystem, w: &[f64]) -> Result<DMatrix<f64>> {
    check_dims(sys, w)?;
    check_positive(w)?;
    let q = sys.q();
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, k| q[(i, k)] / w[i]);
    Ok(symmetrize(q.transpose() * scaled))
}

/// `M^{-1/2} Q Q^T M^{-1/2}`: for pairwise systems this is the vertex-weighted
/// Laplacian with `alpha = 1/w`; for other systems it is its formal analogue.
pub fn weighted_gram(sys: &ContrastSystem, w: &[f64]) -> Result<DMatrix<f64>> {
    check_dims(sys, w)?;
    check_positive(w)?;
    let a = symmetrize(sys.gram());
    let root: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        a[(i, j)] / (root[i] * root[j])
    }))
}

/// Vertex-weighted Laplacian of `g` with `alpha = 1/w`: diagonal `d_i / w_i`,
/// `-(w_i w_j)^{-1/2}` on adjacent pairs.
pub fn vertex_weighted_laplacian(g: &ComparisonGraph, d: &Design) -> Result<DMatrix<f64>> {
    laplacian_raw(g, d.weights())
}

pub(crate) fn laplacian_raw(g: &ComparisonGraph, w: &[f64]) -> Result<DMatrix<f64>> {
    if g.v() != w.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} weights for {} vertices",
            w.len(),
            g.v()
        )));
    }
    check_positive(w)?;
    let mut l = DMatrix::zeros(g.v(), g.v());
    for (i, &deg) in g.degrees().iter().enumerate() {
        l[(i, i)] = deg as f64 / w[i];
    }
    for &(a, b) in g.edges() {
        let off = -1.0 / (w[a] * w[b]).sqrt();
        l[(a, b)] = off;
        l[(b, a)] = off;
    }
    Ok(l)
}

/// `N_Q(w) = V_Q(w)^{-1}` for full-rank systems.
pub fn information_matrix(sys: &ContrastSystem, d: &Design) -> Result<DMatrix<f64>> {
    let rank = rank_of(sys, DEFAULT_RANK_TOL);
    if rank < sys.s() {
        return Err(Error::RankDeficient { rank, s: sys.s() });
    }
    let eig = eigen_sym(&v_matrix(sys, d)?)?;
    Ok(spectral_inverse(&eig, |_| true))
}

/// `C_Q(w) = V_Q(w)^+`.
pub fn c_matrix(sys: &ContrastSystem, d: &Design) -> Result<DMatrix<f64>> {
    pseudo_inverse(&v_matrix(sys, d)?, DEFAULT_RANK_TOL)
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, inverting eigenvalues
/// above `rel_tol * lambda_max`.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let eig = eigen_sym(m)?;
    let top = eig.values.iter().cloned().fold(0.0, f64::max);
    let cut = rel_tol * top;
    Ok(spectral_inverse(&eig, |lambda| lambda > cut))
}

fn spectral_inverse(eig: &SymmetricEigen, keep: impl Fn(f64) -> bool) -> DMatrix<f64> {
    let n = eig.values.len();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if !keep(lambda) {
            continue;
        }
        let u = eig.vectors.column(k);
        out += (u * u.transpose()) / lambda;
    }
    symmetrize(out)
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::PreconditionViolated(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, nonincreasing.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Result<Spectrum> {
    Ok(eigen_sym(m)?.spectrum())
}

/// Cyclic Jacobi eigendecomposition with a fixed row-by-row sweep order.
///
/// Eigenpairs are returned sorted by nonincreasing eigenvalue.
pub fn eigen_sym(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    let mut a = symmetrize(m.clone());
    let mut vecs = DMatrix::<f64>::identity(n, n);
    let scale = a.norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut vecs, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(SymmetricEigen { values, vectors })
}

// Applies J^T A J with J the rotation in the (p, q) plane, accumulating V J.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Product of the `r` largest eigenvalues.
pub fn pseudo_det(spec: &Spectrum, r: usize) -> Result<f64> {
    Ok(log_pseudo_det(spec, r)?.exp())
}

/// Natural log of [`pseudo_det`], summed in log space.
pub fn log_pseudo_det(spec: &Spectrum, r: usize) -> Result<f64> {
    if r > spec.values.len() {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds spectrum length {}",
            spec.values.len()
        )));
    }
    let mut acc = 0.0;
    for (index, &value) in spec.values[..r].iter().enumerate() {
        if value <= spec.tol {
            return Err(Error::NonPositiveEigenvalue { index, value });
        }
        acc += value.ln();
    }
    Ok(acc)
}

/// Determinant of `m` with row `i` and column `j` removed. Requires `m 1 = 0`.
pub fn cofactor_minor(m: &DMatrix<f64>, i: usize, j: usize) -> Result<f64> {
    check_symmetric(m)?;
    let n = m.nrows();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "minor index ({i}, {j}) out of range for {n}x{n}"
        )));
    }
    let scale = m.amax().max(1.0);
    let worst_row = m
        .row_iter()
        .map(|r| r.iter().sum::<f64>().abs())
        .fold(0.0, f64::max);
    if worst_row > 1e-10 * scale {
        return Err(Error::PreconditionViolated(format!(
            "row sums must vanish, found {worst_row:e}"
        )));
    }
    Ok(m.clone().remove_row(i).remove_column(j).determinant())
}
