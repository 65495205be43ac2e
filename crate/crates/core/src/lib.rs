//! Optimal approximate treatment designs for systems of treatment contrasts.
//!
//! A system of pairwise comparisons `tau_j - tau_i` is a directed graph on
//! the treatments. A design `w > 0` becomes the vertex weights `alpha = 1/w`,
//! and the positive eigenvalues of `V_Q(w) = Q^T M^{-1}(w) Q` coincide with
//! those of the vertex-weighted Laplacian. Every orthogonally invariant
//! criterion, including Kiefer's `Phi_p`, is therefore a function of the
//! Laplacian spectrum.
//!
//! | module | contents |
//! |--------|----------|
//! | [`contrasts`] | contrast systems, pairwise detection, comparison graphs |
//! | [`spectral`] | moment/variance matrices, Laplacian, Jacobi eigensolver |
//! | [`criteria`] | `Phi_p` / `Psi_p` by the variance-matrix and Laplacian routes |
//! | [`closed_form`] | analytic A-, E- and D-optimal designs |
//! | [`symmetry`] | permutations, cyclic invariance, orbit reduction |
//! | [`forests`] | rooted spanning forests and characteristic polynomials |
//! | [`optimizer`] | numeric optimisation, E-optimality certificate, grid oracle |
//! | [`families`] | standard contrast systems |

pub mod closed_form;
pub mod contrasts;
pub mod criteria;
pub mod error;
pub mod families;
pub mod forests;
pub mod optimizer;
pub mod spectral;
pub mod symmetry;

pub use contrasts::{ComparisonGraph, ContrastSystem, GraphClassification, DEFAULT_RANK_TOL};
pub use criteria::{CriterionP, CriterionValue, Evaluator};
pub use error::{Error, Result};
pub use spectral::{Design, Spectrum};
