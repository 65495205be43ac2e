//! Analytic optimal designs.
//!
//! * A-optimal, any system: `w_i ∝ sqrt(sum_k q_ik^2)`; for pairwise systems
//!   this is `w_i ∝ sqrt(d_i)`.
//! * E-optimal, bipartite pairwise systems: `w_i ∝ d_i`, with
//!   `Psi_-inf = 2 sum_i d_i = 4s`.
//! * D-optimal, rank `v - 1`: the uniform design.

use nalgebra::DVector;
use serde::Serialize;

use crate::contrasts::{ComparisonGraph, ContrastSystem, DEFAULT_RANK_TOL};
use crate::criteria::{psi_p, CriterionP, CriterionValue, Evaluator};
use crate::error::{Error, Result};
use crate::spectral::{v_matrix, Design};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AGeneral,
    APairwise,
    EBipartite,
    DUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormResult {
    pub design: Design,
    pub criterion: CriterionValue,
    pub method: Method,
    /// Unit eigenvector of `V_Q(w*)` for `lambda_max`; set for `EBipartite`.
    pub eigvec: Option<Vec<f64>>,
}

/// `x / sum(x)` with a compensated sum and a single division, so that
/// exactly representable proportions come out exact.
fn proportions(x: &[f64]) -> Result<Design> {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for &xi in x {
        let t = sum + xi;
        carry += if sum.abs() >= xi.abs() {
            (sum - t) + xi
        } else {
            (xi - t) + sum
        };
        sum = t;
    }
    let total = sum + carry;
    Design::new(x.iter().map(|xi| xi / total).collect())
}

/// A-optimal proportions `sqrt(sum_k q_ik^2) / sum_j sqrt(sum_k q_jk^2)`.
pub fn a_optimal(sys: &ContrastSystem) -> Result<ClosedFormResult> {
    let norms: Vec<f64> = sys.row_sq_norms().into_iter().map(f64::sqrt).collect();
    let design = proportions(&norms)?;
    let criterion = psi_p(sys, &design, CriterionP::A)?;
    Ok(ClosedFormResult {
        design,
        criterion,
        method: Method::AGeneral,
        eigvec: None,
    })
}

/// A-optimal proportions `sqrt(d_i) / sum_j sqrt(d_j)` for a pairwise system.
pub fn a_optimal_pairwise(g: &ComparisonGraph) -> Result<ClosedFormResult> {
    let roots: Vec<f64> = g.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    let design = proportions(&roots)?;
    let sys = g.to_system()?;
    let criterion = psi_p(&sys, &design, CriterionP::A)?;
    Ok(ClosedFormResult {
        design,
        criterion,
        method: Method::APairwise,
        eigvec: None,
    })
}

/// Edge signs `±1` such that reversing the `-1` edges leaves every vertex a
/// sink or a source. In each component the first edge at the lowest vertex
/// keeps its orientation. `None` for non-bipartite graphs.
pub fn sink_source_orientation(g: &ComparisonGraph) -> Option<Vec<i8>> {
    let color = g.two_coloring()?;
    let (comp, count) = g.components();
    let incident = g.incident();
    // colour whose out-edges keep sign +1, per component
    let mut keep = vec![None; count];
    for u in 0..g.v() {
        let c = comp[u];
        if keep[c].is_none() {
            if let Some(&(_, e)) = incident[u].iter().min_by_key(|&&(_, e)| e) {
                keep[c] = Some(color[g.edges()[e].0]);
            }
        }
    }
    Some(
        g.edges()
            .iter()
            .map(|&(j, _)| {
                if Some(color[j]) == keep[comp[j]] {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    )
}

/// Degree-proportional E-optimal design for a bipartite pairwise system,
/// together with the eigenvector `h` with entries `±1/sqrt(s)`.
pub fn e_optimal_bipartite(g: &ComparisonGraph) -> Result<ClosedFormResult> {
    let signs = sink_source_orientation(g).ok_or(Error::NotBipartite)?;
    let total: usize = g.degrees().iter().sum();
    let design = Design::from_unnormalized(
        g.degrees()
            .iter()
            .map(|&d| d as f64 / total as f64)
            .collect(),
    )?;
    let sys = g.to_system()?;
    let s = g.s() as f64;
    let h = DVector::from_iterator(signs.len(), signs.iter().map(|&x| x as f64 / s.sqrt()));

    let lambda = 4.0 * s;
    let residual = (v_matrix(&sys, &design)? * &h - &h * lambda).norm();
    if residual > 1e-8 * lambda {
        return Err(Error::NumericalCheck(format!(
            "||V h - 4s h|| = {residual:e} exceeds tolerance"
        )));
    }

    let criterion = psi_p(&sys, &design, CriterionP::E)?;
    Ok(ClosedFormResult {
        design,
        criterion,
        method: Method::EBipartite,
        eigvec: Some(h.iter().copied().collect()),
    })
}

/// The uniform design, D-optimal for any system of rank `v - 1`.
pub fn d_optimal_uniform(sys: &ContrastSystem) -> Result<ClosedFormResult> {
    d_optimal_uniform_with_tol(sys, DEFAULT_RANK_TOL)
}

pub fn d_optimal_uniform_with_tol(sys: &ContrastSystem, rank_tol: f64) -> Result<ClosedFormResult> {
    let eval = Evaluator::with_rank_tol(sys, rank_tol);
    let needed = sys.v() - 1;
    if eval.rank() < needed {
        return Err(Error::RankTooLow {
            rank: eval.rank(),
            needed,
        });
    }
    let design = Design::uniform(sys.v());
    let criterion = eval.evaluate(&design, CriterionP::D)?;
    Ok(ClosedFormResult {
        design,
        criterion,
        method: Method::DUniform,
        eigvec: None,
    })
}
