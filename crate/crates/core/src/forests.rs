//! Rooted spanning forests and characteristic-polynomial coefficients.
//!
//! With `alpha = 1/w`, a spanning forest rooted at `S` has its edges directed
//! towards the roots and weight `prod alpha_i` over the non-root vertices
//! (each the tail of exactly one forest edge). `kappa_k` sums these weights
//! over all root sets of size `k`. The coefficients of
//! `det(lambda I - L_w) = sum_k (-1)^k c_k lambda^{v-k}` satisfy
//! `c_k = kappa_{v-k}`, and `Psi_0 = kappa_{v-r}`.
//!
//! The enumeration is deliberately exhaustive: it is an oracle that does not
//! share any code path with the eigensolver.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::contrasts::ComparisonGraph;
use crate::criteria::{value_from_eigenvalues, CriterionP, Evaluator};
use crate::error::{Error, Result};
use crate::spectral::{check_positive, laplacian_raw, Design};

/// Largest `v` accepted by the enumerator.
pub const MAX_ENUMERATION_V: usize = 12;

const IDENTITY_TOL: f64 = 1e-6;

/// `kappa_k(G)` for the design `d` (`alpha = 1/w`).
pub fn kappa_k(g: &ComparisonGraph, d: &Design, k: usize) -> Result<f64> {
    if d.v() != g.v() {
        return Err(Error::InvalidArgument(format!(
            "design has {} weights for {} vertices",
            d.v(),
            g.v()
        )));
    }
    kappa_k_alpha(g, &d.alphas(), k)
}

/// `kappa_k(G)` for arbitrary positive vertex weights `alpha`.
pub fn kappa_k_alpha(g: &ComparisonGraph, alpha: &[f64], k: usize) -> Result<f64> {
    let v = g.v();
    if v > MAX_ENUMERATION_V {
        return Err(Error::TooLarge(format!(
            "forest enumeration is limited to v <= {MAX_ENUMERATION_V}, got v = {v}"
        )));
    }
    if k == 0 || k >= v {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={}",
            v - 1
        )));
    }
    if alpha.len() != v {
        return Err(Error::InvalidArgument(format!(
            "{} vertex weights for {v} vertices",
            alpha.len()
        )));
    }
    check_positive(alpha)?;

    let mut enumerator = ForestSum {
        edges: g.edges(),
        alpha,
        target: v - k,
        total: 0.0,
    };
    enumerator.walk(0, 0, (0..v).collect());
    Ok(enumerator.total)
}

struct ForestSum<'a> {
    edges: &'a [(usize, usize)],
    alpha: &'a [f64],
    target: usize,
    total: f64,
}

impl ForestSum<'_> {
    /// Include/exclude edge `e`; `label` holds component representatives.
    fn walk(&mut self, e: usize, taken: usize, label: Vec<usize>) {
        if taken == self.target {
            self.total += self.forest_weight(&label);
            return;
        }
        if self.edges.len() - e < self.target - taken {
            return;
        }
        let (a, b) = self.edges[e];
        let (la, lb) = (label[a], label[b]);
        if la != lb {
            let merged = label
                .iter()
                .map(|&l| if l == lb { la } else { l })
                .collect();
            self.walk(e + 1, taken + 1, merged);
        }
        self.walk(e + 1, taken, label);
    }

    /// Sum over root choices, one root per tree, of the non-root products.
    fn forest_weight(&self, label: &[usize]) -> f64 {
        let mut weight = 1.0;
        let mut done = vec![false; label.len()];
        for &rep in label {
            if std::mem::replace(&mut done[rep], true) {
                continue;
            }
            let members: Vec<usize> = (0..label.len()).filter(|&i| label[i] == rep).collect();
            let rooted: f64 = members
                .iter()
                .map(|&root| {
                    members
                        .iter()
                        .filter(|&&i| i != root)
                        .map(|&i| self.alpha[i])
                        .product::<f64>()
                })
                .sum();
            weight *= rooted;
        }
        weight
    }
}

/// Coefficients `c_0..c_v` of `det(lambda I - m) = sum_k (-1)^k c_k lambda^{v-k}`
/// by the Faddeev-LeVerrier recurrence.
///
/// # Panics
///
/// If `m` is not square.
pub fn char_poly_coeffs(m: &DMatrix<f64>) -> Vec<f64> {
    assert!(
        m.is_square(),
        "characteristic polynomial needs a square matrix"
    );
    let n = m.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    let mut a = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        mk = m * &mk + &identity * a[k - 1];
        let ak = -(m * &mk).trace() / k as f64;
        a.push(ak);
    }
    a.iter()
        .enumerate()
        .map(|(k, &x)| if k % 2 == 0 { x } else { -x })
        .collect()
}

/// Three independent computations of the D-criterion value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DIdentityReport {
    pub rank: usize,
    /// `Psi_0` from the eigenvalues of `V_Q`.
    pub psi0: f64,
    /// `kappa_{v-r}` by forest enumeration.
    pub kappa: f64,
    /// `c_r` of `L_w` by Faddeev-LeVerrier.
    pub c_r: f64,
    pub dev_psi_kappa: f64,
    pub dev_psi_c: f64,
    pub dev_kappa_c: f64,
    pub passed: bool,
    pub warnings: Vec<String>,
}

fn rel_dev(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Checks `Psi_0(w) = kappa_{v-r}(G) = c_r(L_w)`.
pub fn verify_d_identity(g: &ComparisonGraph, d: &Design, r: usize) -> Result<DIdentityReport> {
    let v = g.v();
    if r == 0 || r >= v {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in 1..={}",
            v - 1
        )));
    }
    let kappa = kappa_k(g, d, v - r)?;

    let sys = g.to_system()?;
    let spectrum = Evaluator::new(&sys).spectrum(d.weights())?;
    let psi0 = value_from_eigenvalues(&spectrum.values, r, CriterionP::D)?.psi;

    let l = laplacian_raw(g, d.weights())?;
    let c = char_poly_coeffs(&l);
    let c_r = c[r];

    let mut warnings = Vec::new();
    let bound = 1e-8 * l.norm().powi(v as i32);
    if c[v].abs() > bound {
        warnings.push(format!(
            "|c_v| = {:e} exceeds {bound:e}; coefficients may be ill-conditioned",
            c[v].abs()
        ));
    }

    let dev_psi_kappa = rel_dev(psi0, kappa);
    let dev_psi_c = rel_dev(psi0, c_r);
    let dev_kappa_c = rel_dev(kappa, c_r);
    let passed = [dev_psi_kappa, dev_psi_c, dev_kappa_c]
        .iter()
        .all(|&x| x <= IDENTITY_TOL);
    Ok(DIdentityReport {
        rank: r,
        psi0,
        kappa,
        c_r,
        dev_psi_kappa,
        dev_psi_c,
        dev_kappa_c,
        passed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn kappa_examples() {
        let path = families::path(3).unwrap();
        assert!(close(
            kappa_k(&path, &Design::uniform(3), 1).unwrap(),
            27.0,
            1e-14
        ));

        let edge = families::path(2).unwrap();
        let d = Design::new(vec![0.5, 0.5]).unwrap();
        assert!(close(kappa_k(&edge, &d, 1).unwrap(), 4.0, 1e-14));

        let two = ComparisonGraph::new(4, vec![(1, 0), (3, 2)]).unwrap();
        assert_eq!(kappa_k(&two, &Design::uniform(4), 1).unwrap(), 0.0);
        // two roots: one per edge, 2 * 2 choices of weight 4 * 4
        assert!(close(
            kappa_k(&two, &Design::uniform(4), 2).unwrap(),
            64.0,
            1e-14
        ));
    }

    #[test]
    fn kappa_bounds() {
        let big = families::path(13).unwrap();
        assert!(matches!(
            kappa_k(&big, &Design::uniform(13), 1),
            Err(Error::TooLarge(_))
        ));
        let path = families::path(3).unwrap();
        assert!(kappa_k(&path, &Design::uniform(3), 0).is_err());
        assert!(kappa_k(&path, &Design::uniform(3), 3).is_err());
    }

    #[test]
    fn kappa_uses_non_root_weights() {
        // single edge, unequal weights: the two rooted trees weigh alpha_1 and alpha_2
        let edge = families::path(2).unwrap();
        let k = kappa_k_alpha(&edge, &[2.0, 5.0], 1).unwrap();
        assert_eq!(k, 7.0);
        // path a-b-c rooted anywhere: alpha_b alpha_c + alpha_a alpha_c + alpha_a alpha_b
        let path = families::path(3).unwrap();
        let k = kappa_k_alpha(&path, &[2.0, 3.0, 5.0], 1).unwrap();
        assert_eq!(k, 15.0 + 10.0 + 6.0);
    }

    #[test]
    fn char_poly_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]);
        let c = char_poly_coeffs(&m);
        assert_eq!(c.len(), 3);
        assert!(close(c[0], 1.0, 1e-15) && close(c[1], 4.0, 1e-15));
        assert!(c[2].abs() < 1e-12);

        let path = families::path(3).unwrap();
        let l = laplacian_raw(&path, Design::uniform(3).weights()).unwrap();
        assert!(close(char_poly_coeffs(&l)[2], 27.0, 1e-12));
    }

    #[test]
    fn char_poly_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
            let m = &x * x.transpose();
            let c = char_poly_coeffs(&m);
            let eig = m.clone().symmetric_eigenvalues();
            // elementary symmetric functions of the spectrum
            let mut e = [0.0; 6];
            e[0] = 1.0;
            for &lam in eig.iter() {
                for k in (1..=5).rev() {
                    e[k] += lam * e[k - 1];
                }
            }
            for k in 0..5 {
                assert!((c[k] - e[k]).abs() <= 1e-6 * e[k].abs().max(1e-6));
            }
        }
    }

    #[test]
    fn coefficients_equal_forest_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let graphs = vec![
            families::path(5).unwrap(),
            families::cyclic_comparisons(6).unwrap(),
            families::all_pairwise(5).unwrap(),
            families::two_sets(3).unwrap(),
            ComparisonGraph::from_one_indexed(4, &[(1, 2), (2, 3), (3, 1), (1, 4)]).unwrap(),
            families::comparisons_with_control(7).unwrap(),
        ];
        for g in graphs {
            let v = g.v();
            let w: Vec<f64> = (0..v).map(|_| rng.random_range(0.05..1.0)).collect();
            let d = Design::from_unnormalized(w).unwrap();
            let c = char_poly_coeffs(&laplacian_raw(&g, d.weights()).unwrap());
            for (k, &ck) in c.iter().enumerate().take(v).skip(1) {
                let kappa = kappa_k(&g, &d, v - k).unwrap();
                assert!(close(ck, kappa, 1e-6), "k={k}: {ck} vs {kappa}");
            }
        }
    }

    #[test]
    fn orientation_and_scaling() {
        let g = ComparisonGraph::from_one_indexed(5, &[(1, 2), (2, 3), (3, 1), (4, 1), (5, 4)])
            .unwrap();
        let alpha = [1.5, 2.0, 0.7, 3.0, 1.1];
        let t = 2.5;
        let scaled: Vec<f64> = alpha.iter().map(|a| a * t).collect();
        for k in 1..5 {
            let base = kappa_k_alpha(&g, &alpha, k).unwrap();
            for e in 0..g.s() {
                let flipped = kappa_k_alpha(&g.with_edge_reversed(e), &alpha, k).unwrap();
                assert!(close(base, flipped, 1e-14));
            }
            let s = kappa_k_alpha(&g, &scaled, k).unwrap();
            assert!(close(s, base * t.powi(5 - k as i32), 1e-12));
        }
    }

    #[test]
    fn d_identity_examples() {
        let path = families::path(3).unwrap();
        let rep = verify_d_identity(&path, &Design::uniform(3), 2).unwrap();
        assert!(rep.passed);
        assert!(close(rep.psi0, 27.0, 1e-10) && close(rep.kappa, 27.0, 1e-14));
        assert!(rep.warnings.is_empty());

        let q1 =
            ComparisonGraph::from_one_indexed(7, &[(2, 1), (3, 2), (4, 3), (5, 3), (6, 5), (7, 5)])
                .unwrap();
        let rep = verify_d_identity(&q1, &Design::uniform(7), 6).unwrap();
        assert!(rep.passed, "{rep:?}");

        let two = ComparisonGraph::new(4, vec![(1, 0), (3, 2)]).unwrap();
        let rep = verify_d_identity(&two, &Design::uniform(4), 2).unwrap();
        assert!(rep.passed && close(rep.kappa, 64.0, 1e-14));
    }
}
