//! Kiefer's `Phi_p` criteria and their minimisation form `Psi_p`.
//!
//! With `V = Q^T M^{-1}(w) Q` and `r = rank(Q)`:
//!
//! ```text
//! Psi_p   = sum_{j<=r} lambda_j(V)^{-p}      p in (-inf, 0)
//! Psi_0   = prod_{j<=r} lambda_j(V)
//! Psi_-inf = lambda_max(V)
//! ```
//!
//! and `Phi_p = (Psi_p / r)^{1/p}`, `Phi_0 = Psi_0^{-1/r}`,
//! `Phi_-inf = 1 / Psi_-inf`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::contrasts::{rank_of, ComparisonGraph, ContrastSystem, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::spectral::{
    eigenvalues_sym, laplacian_raw, v_matrix_raw, weighted_gram, Design, Spectrum,
};

/// The exponent `p` of a Kiefer criterion, `p <= 0` or `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriterionP {
    Finite(f64),
    NegInf,
}

impl CriterionP {
    pub const D: CriterionP = CriterionP::Finite(0.0);
    pub const A: CriterionP = CriterionP::Finite(-1.0);
    pub const E: CriterionP = CriterionP::NegInf;

    pub fn finite(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidCriterion(format!(
                "{p} is not finite; use CriterionP::NegInf"
            )));
        }
        if p > 0.0 {
            return Err(Error::InvalidCriterion(format!("p = {p} must be <= 0")));
        }
        Ok(CriterionP::Finite(if p == 0.0 { 0.0 } else { p }))
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, CriterionP::NegInf)
    }
}

impl fmt::Display for CriterionP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionP::NegInf => f.write_str("neg-inf"),
            CriterionP::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for CriterionP {
    type Err = Error;

    /// Accepts `neg-inf` or a decimal literal `<= 0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "neg-inf" {
            return Ok(CriterionP::NegInf);
        }
        let p: f64 = s
            .parse()
            .map_err(|_| Error::InvalidCriterion(format!("cannot parse {s:?}")))?;
        CriterionP::finite(p)
    }
}

impl Serialize for CriterionP {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionValue {
    pub phi: f64,
    pub psi: f64,
    pub p: CriterionP,
    pub rank: usize,
}

/// Evaluates criteria for a fixed system, with its rank computed once.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    sys: &'a ContrastSystem,
    rank: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a ContrastSystem) -> Self {
        Self::with_rank_tol(sys, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(sys: &'a ContrastSystem, rank_tol: f64) -> Self {
        Self {
            sys,
            rank: rank_of(sys, rank_tol),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn system(&self) -> &ContrastSystem {
        self.sys
    }

    /// Spectrum of `V_Q(w)`.
    pub fn spectrum(&self, w: &[f64]) -> Result<Spectrum> {
        eigenvalues_sym(&v_matrix_raw(self.sys, w)?)
    }

    pub fn evaluate(&self, d: &Design, p: CriterionP) -> Result<CriterionValue> {
        self.evaluate_raw(d.weights(), p)
    }

    /// Like [`Evaluator::evaluate`] but for any positive weight vector; the
    /// weights need not sum to one.
    pub fn evaluate_raw(&self, w: &[f64], p: CriterionP) -> Result<CriterionValue> {
        let spec = self.spectrum(w)?;
        value_from_eigenvalues(&spec.values, self.rank, p)
    }

    /// `Psi_p` evaluated on the `v x v` matrix `M^{-1/2} Q Q^T M^{-1/2}`,
    /// which shares its positive eigenvalues with `V_Q`.
    pub fn evaluate_gram(&self, w: &[f64], p: CriterionP) -> Result<CriterionValue> {
        let spec = eigenvalues_sym(&weighted_gram(self.sys, w)?)?;
        value_from_eigenvalues(&spec.values, self.rank, p)
    }
}

/// `Psi_p` from the `r` largest of `values` (sorted nonincreasing).
pub fn value_from_eigenvalues(values: &[f64], r: usize, p: CriterionP) -> Result<CriterionValue> {
    if r == 0 || r > values.len() {
        return Err(Error::InvalidArgument(format!(
            "rank {r} incompatible with {} eigenvalues",
            values.len()
        )));
    }
    let top = &values[..r];
    if let Some(index) = top.iter().position(|&x| x.is_nan() || x <= 0.0) {
        return Err(Error::NonPositiveEigenvalue {
            index,
            value: top[index],
        });
    }
    let rf = r as f64;
    let (psi, phi) = match p {
        CriterionP::NegInf => {
            let psi = top[0];
            (psi, 1.0 / psi)
        }
        CriterionP::Finite(0.0) => {
            let log_psi: f64 = top.iter().map(|x| x.ln()).sum();
            (log_psi.exp(), (-log_psi / rf).exp())
        }
        CriterionP::Finite(q) => {
            let psi: f64 = top.iter().map(|x| x.powf(-q)).sum();
            (psi, (psi / rf).powf(1.0 / q))
        }
    };
    Ok(CriterionValue {
        phi,
        psi,
        p,
        rank: r,
    })
}

/// `Psi_p` and `Phi_p` of `d` for `sys`, via the eigenvalues of `V_Q(w)`.
pub fn psi_p(sys: &ContrastSystem, d: &Design, p: CriterionP) -> Result<CriterionValue> {
    Evaluator::new(sys).evaluate(d, p)
}

/// `Psi_p` via the vertex-weighted Laplacian; `r = v - #components`.
pub fn psi_p_via_laplacian(
    g: &ComparisonGraph,
    d: &Design,
    p: CriterionP,
) -> Result<CriterionValue> {
    let (_, components) = g.components();
    let spec = eigenvalues_sym(&laplacian_raw(g, d.weights())?)?;
    value_from_eigenvalues(&spec.values, g.v() - components, p)
}

/// `Phi_p(d) / Phi_p(d_ref)`.
pub fn efficiency(sys: &ContrastSystem, d: &Design, d_ref: &Design, p: CriterionP) -> Result<f64> {
    let eval = Evaluator::new(sys);
    Ok(eval.evaluate(d, p)?.phi / eval.evaluate(d_ref, p)?.phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrasts::{detect_pairwise, parse_contrast_matrix};
    use nalgebra::DMatrix;

    const Q1_CSV: &str = "-1,0,0,0,0,0\n1,-1,0,0,0,0\n0,1,-1,-1,0,0\n0,0,1,0,0,0\n0,0,0,1,-1,-1\n0,0,0,0,1,0\n0,0,0,0,0,1\n";

    fn triangle_pendant() -> ComparisonGraph {
        ComparisonGraph::from_one_indexed(4, &[(1, 2), (2, 3), (3, 1), (1, 4)]).unwrap()
    }

    fn s_const() -> f64 {
        4.0 + 2.0 * 3f64.sqrt() + 2f64.sqrt()
    }

    #[test]
    fn parse_p() {
        assert_eq!("neg-inf".parse::<CriterionP>().unwrap(), CriterionP::NegInf);
        assert_eq!("-1".parse::<CriterionP>().unwrap(), CriterionP::A);
        assert_eq!("-0".parse::<CriterionP>().unwrap(), CriterionP::D);
        assert!("0.5".parse::<CriterionP>().is_err());
        assert!("-inf".parse::<CriterionP>().is_err());
        assert_eq!(CriterionP::NegInf.to_string(), "neg-inf");
    }

    #[test]
    fn c_optimality_column() {
        let q = DMatrix::from_column_slice(4, 1, &[-1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let sys = ContrastSystem::new(q).unwrap();
        let d = Design::new(vec![0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]).unwrap();
        let val = psi_p(&sys, &d, CriterionP::D).unwrap();
        // w_1^{-1} + (v-1)^{-2} sum_{i>1} w_i^{-1} = 2 + 18/9
        assert!((val.psi - 4.0).abs() < 1e-12);
        assert_eq!(val.rank, 1);
        assert!((val.phi - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_edge_a_value() {
        let sys = parse_contrast_matrix("-1\n1\n").unwrap();
        let val = psi_p(&sys, &Design::uniform(2), CriterionP::A).unwrap();
        assert!((val.psi - 4.0).abs() < 1e-14);
        assert!((val.phi - 0.25).abs() < 1e-14);
    }

    #[test]
    fn triangle_pendant_degree_rule_e_value() {
        let sys = triangle_pendant().to_system().unwrap();
        let d = Design::new(vec![3.0 / 8.0, 0.25, 0.25, 1.0 / 8.0]).unwrap();
        let val = psi_p(&sys, &d, CriterionP::E).unwrap();
        assert!((val.psi - 13.8297).abs() < 5e-4, "{}", val.psi);
    }

    #[test]
    fn laplacian_route_examples() {
        let q1 = parse_contrast_matrix(Q1_CSV).unwrap();
        let g = detect_pairwise(&q1).unwrap();
        let s = s_const();
        let w_a: Vec<f64> = g.degrees().iter().map(|&k| (k as f64).sqrt() / s).collect();
        let d_a = Design::from_unnormalized(w_a).unwrap();
        let lap = psi_p_via_laplacian(&g, &d_a, CriterionP::A).unwrap();
        let trace = crate::spectral::v_matrix(&q1, &d_a).unwrap().trace();
        assert!((lap.psi - s * s).abs() < 1e-9 * s * s);
        assert!((lap.psi - trace).abs() < 1e-9 * trace);

        let w_e: Vec<f64> = g.degrees().iter().map(|&k| k as f64 / 12.0).collect();
        let d_e = Design::new(w_e).unwrap();
        let lap = psi_p_via_laplacian(&g, &d_e, CriterionP::E).unwrap();
        assert!((lap.psi - 24.0).abs() < 1e-10);

        let path = ComparisonGraph::from_one_indexed(3, &[(2, 1), (3, 2)]).unwrap();
        let lap = psi_p_via_laplacian(&path, &Design::uniform(3), CriterionP::D).unwrap();
        assert!((lap.psi - 27.0).abs() < 1e-10);
        assert_eq!(lap.rank, 2);
    }

    #[test]
    fn efficiency_examples() {
        let g = triangle_pendant();
        let sys = g.to_system().unwrap();
        let d = Design::new(vec![0.38, 0.23, 0.23, 0.16]).unwrap();
        assert!((efficiency(&sys, &d, &d, CriterionP::E).unwrap() - 1.0).abs() < 1e-15);
        let rule = Design::new(vec![3.0 / 8.0, 0.25, 0.25, 1.0 / 8.0]).unwrap();
        let eff = efficiency(&sys, &rule, &d, CriterionP::E).unwrap();
        assert!((eff - 13.0435 / 13.8297).abs() < 1e-4, "{eff}");

        let q1 = parse_contrast_matrix(Q1_CSV).unwrap();
        let s = s_const();
        let w_a: Vec<f64> = [1.0, 2f64.sqrt(), 3f64.sqrt(), 1.0, 3f64.sqrt(), 1.0, 1.0]
            .iter()
            .map(|x| x / s)
            .collect();
        let d_a = Design::from_unnormalized(w_a).unwrap();
        let eff = efficiency(&q1, &Design::uniform(7), &d_a, CriterionP::A).unwrap();
        assert!((eff - s * s / 84.0).abs() < 1e-12);
        assert!((eff - 0.9384).abs() < 1e-4);
    }

    #[test]
    fn phi_psi_relations() {
        let q1 = parse_contrast_matrix(Q1_CSV).unwrap();
        let d = Design::from_unnormalized(vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0]).unwrap();
        let eval = Evaluator::new(&q1);
        let r = 6.0;
        let v0 = eval.evaluate(&d, CriterionP::D).unwrap();
        assert!((v0.phi - v0.psi.powf(-1.0 / r)).abs() < 1e-12 * v0.phi);
        let vinf = eval.evaluate(&d, CriterionP::E).unwrap();
        assert!((vinf.phi * vinf.psi - 1.0).abs() < 1e-14);
        let vh = eval.evaluate(&d, CriterionP::Finite(-0.5)).unwrap();
        assert!((vh.phi - (vh.psi / r).powf(-2.0)).abs() < 1e-12 * vh.phi);

        // Phi_-inf = lambda_min(N_Q) for full-rank systems.
        let n = crate::spectral::information_matrix(&q1, &d).unwrap();
        let lmin = *eigenvalues_sym(&n).unwrap().values.last().unwrap();
        assert!((vinf.phi - lmin).abs() < 1e-8 * lmin);
    }

    #[test]
    fn rejects_infeasible() {
        let sys = parse_contrast_matrix("-1\n1\n").unwrap();
        let eval = Evaluator::new(&sys);
        assert!(matches!(
            eval.evaluate_raw(&[1.0, 0.0], CriterionP::A),
            Err(Error::InfeasibleDesign(_))
        ));
        assert!(matches!(
            eval.evaluate_raw(&[-0.5, 1.5], CriterionP::A),
            Err(Error::InfeasibleDesign(_))
        ));
    }

    #[test]
    fn scaling_weights_down_increases_psi() {
        let q1 = parse_contrast_matrix(Q1_CSV).unwrap();
        let eval = Evaluator::new(&q1);
        let w = vec![1.0 / 7.0; 7];
        let shrunk: Vec<f64> = w.iter().map(|x| x / 1.5).collect();
        for p in [
            CriterionP::D,
            CriterionP::Finite(-0.5),
            CriterionP::A,
            CriterionP::E,
        ] {
            let a = eval.evaluate_raw(&w, p).unwrap().psi;
            let b = eval.evaluate_raw(&shrunk, p).unwrap().psi;
            assert!(b > a);
        }
    }
}
