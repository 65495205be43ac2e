use std::fs;
use std::path::Path;

use odg_core::closed_form::{
    a_optimal, a_optimal_pairwise, d_optimal_uniform_with_tol, e_optimal_bipartite,
    ClosedFormResult,
};
use odg_core::forests::verify_d_identity;
use odg_core::optimizer::{e_certificate, grid_oracle, optimize_phi_p, OptimizeOptions};
use odg_core::spectral::{eigenvalues_sym, vertex_weighted_laplacian};
use odg_core::symmetry::{find_cyclic_invariance, orbit_reduction, OrbitReduction, Permutation};
use odg_core::{CriterionP, Design, Error, Evaluator};
use serde_json::json;

use crate::dot;
use crate::exit::{
    Failure, EXIT_NOT_CONVERGED, EXIT_ORACLE_TOO_LARGE, EXIT_OTHER, EXIT_SYMMETRY_TOO_LARGE,
};
use crate::input::{load_system, load_weights, to_design, Loaded};
use crate::report::{CertificateJson, OptimizationJson, RunReport};
use crate::{Common, Method, OracleMode};

pub struct Outcome {
    pub report: Option<RunReport>,
    pub code: i32,
    pub warning: Option<String>,
}

impl Outcome {
    fn ok(report: RunReport) -> Self {
        Self {
            report: Some(report),
            code: 0,
            warning: None,
        }
    }
}

pub struct NumericArgs {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

type CmdResult = Result<Outcome, Failure>;

fn start_report(command: &str, common: &Common) -> RunReport {
    let mut report = RunReport::new(command);
    report.input("q", common.q.display());
    report.input("rank_tol", common.rank_tol);
    report
}

/// Fills `design`, `criterion`, `spectrum` and `laplacian_spectrum`.
fn describe(
    report: &mut RunReport,
    loaded: &Loaded,
    eval: &Evaluator<'_>,
    design: &Design,
    p: CriterionP,
) -> Result<(), Failure> {
    report.criterion = Some(eval.evaluate(design, p)?);
    report.spectrum = Some(eval.spectrum(design.weights())?.values);
    if let Some(g) = &loaded.graph {
        let l = vertex_weighted_laplacian(g, design)?;
        report.laplacian_spectrum = Some(eigenvalues_sym(&l)?.values);
    }
    report.design = Some(design.weights().to_vec());
    Ok(())
}

pub fn eval(common: &Common, w: &str, p: CriterionP) -> CmdResult {
    let loaded = load_system(&common.q)?;
    let design = to_design(load_weights(w)?, loaded.sys.v())?;
    let eval = Evaluator::with_rank_tol(&loaded.sys, common.rank_tol);
    let mut report = start_report("eval", common);
    report.input("w", w);
    report.input("p", p);
    describe(&mut report, &loaded, &eval, &design, p)?;
    Ok(Outcome::ok(report))
}

/// The analytic optimum for `p`, when one applies to this system.
fn closed_form(
    loaded: &Loaded,
    p: CriterionP,
    rank: usize,
    rank_tol: f64,
) -> Result<Option<ClosedFormResult>, Failure> {
    let v = loaded.sys.v();
    let res = match p {
        // With a single nonzero eigenvalue every criterion is A.
        _ if rank == 1 && loaded.graph.is_none() => Some(a_optimal(&loaded.sys)?),
        CriterionP::Finite(-1.0) => Some(match &loaded.graph {
            Some(g) => a_optimal_pairwise(g)?,
            None => a_optimal(&loaded.sys)?,
        }),
        CriterionP::NegInf => match &loaded.graph {
            Some(g) if g.two_coloring().is_some() => Some(e_optimal_bipartite(g)?),
            _ => None,
        },
        CriterionP::Finite(q) if q == 0.0 && rank == v - 1 => {
            Some(d_optimal_uniform_with_tol(&loaded.sys, rank_tol)?)
        }
        _ => None,
    };
    Ok(res)
}

fn method_name(m: odg_core::closed_form::Method) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn parse_perm(loaded: &Loaded, text: &str) -> Result<(Permutation, OrbitReduction), Failure> {
    let perm = Permutation::parse_one_line(text)?;
    if perm.v() != loaded.sys.v() {
        return Err(Error::InvalidPermutation(format!(
            "permutation on {} points for {} treatments",
            perm.v(),
            loaded.sys.v()
        ))
        .into());
    }
    let orbits = orbit_reduction(&loaded.sys, &perm)?;
    Ok((perm, orbits))
}

pub fn optimize(
    common: &Common,
    p: CriterionP,
    method: Method,
    numeric: NumericArgs,
    perm: Option<&str>,
) -> CmdResult {
    let loaded = load_system(&common.q)?;
    let eval = Evaluator::with_rank_tol(&loaded.sys, common.rank_tol);
    let mut report = start_report("optimize", common);
    report.input("p", p);
    report.input(
        "method",
        match method {
            Method::Auto => "auto",
            Method::Closed => "closed",
            Method::Numeric => "numeric",
        },
    );
    let orbits = match perm {
        Some(text) => {
            report.input("perm", text);
            Some(parse_perm(&loaded, text)?.1)
        }
        None => None,
    };

    let analytic =
        match method {
            Method::Numeric => None,
            Method::Closed => Some(
                closed_form(&loaded, p, eval.rank(), common.rank_tol)?.ok_or_else(|| {
                    Failure::new(
                EXIT_OTHER,
                format!("no closed form applies for p = {p} on this system; use --method numeric"),
            )
                })?,
            ),
            Method::Auto => closed_form(&loaded, p, eval.rank(), common.rank_tol)?,
        };

    let mut code = 0;
    let mut warning = None;
    let (design, optimization) = match analytic {
        Some(res) => {
            let opt = OptimizationJson {
                method: method_name(res.method),
                iterations: 0,
                converged: true,
                eigvec: res.eigvec.clone(),
            };
            (res.design, opt)
        }
        None => {
            report.input("tol", numeric.tol);
            report.input("max_iter", numeric.max_iter);
            if let Some(seed) = numeric.seed {
                report.input("seed", seed);
            }
            let opts = OptimizeOptions {
                tol: numeric.tol,
                max_iter: numeric.max_iter,
                seed: numeric.seed,
                orbits: orbits.clone(),
                rank_tol: common.rank_tol,
                ..Default::default()
            };
            let res = match optimize_phi_p(&loaded.sys, p, &opts) {
                Ok(res) => res,
                Err(Error::NotConverged(res)) => {
                    code = EXIT_NOT_CONVERGED;
                    warning = Some(format!(
                        "optimizer stopped after {} iterations without converging",
                        res.iterations
                    ));
                    *res
                }
                Err(e) => return Err(e.into()),
            };
            let opt = OptimizationJson {
                method: if orbits.is_some() {
                    "numeric_orbits"
                } else {
                    "numeric"
                }
                .to_string(),
                iterations: res.iterations,
                converged: res.converged,
                eigvec: res.certificate.as_ref().map(|c| c.eigvec.clone()),
            };
            (res.design, opt)
        }
    };

    describe(&mut report, &loaded, &eval, &design, p)?;
    if p.is_neg_inf() {
        report.certificate = Some(CertificateJson::from(&e_certificate(&loaded.sys, &design)?));
    }
    report.optimization = Some(optimization);
    Ok(Outcome {
        report: Some(report),
        code,
        warning,
    })
}

fn one_indexed_orbits(orbits: &OrbitReduction) -> Vec<Vec<usize>> {
    orbits
        .members()
        .iter()
        .map(|m| m.iter().map(|i| i + 1).collect())
        .collect()
}

pub fn symmetry(common: &Common, max_v: usize, perm: Option<&str>) -> CmdResult {
    let loaded = load_system(&common.q)?;
    let sys = &loaded.sys;
    let mut report = start_report("symmetry", common);
    report.input("max_v", max_v);

    let supplied = match perm {
        Some(text) => {
            report.input("perm", text);
            let p = Permutation::parse_one_line(text)?;
            if p.v() != sys.v() {
                return Err(Error::InvalidPermutation(format!(
                    "permutation on {} points for {} treatments",
                    p.v(),
                    sys.v()
                ))
                .into());
            }
            let orbits = orbit_reduction(sys, &p).ok();
            Some((p, orbits))
        }
        None => None,
    };

    let (searched, cyclic) = match find_cyclic_invariance(sys, max_v) {
        Ok(found) => (true, found),
        Err(Error::TooLarge(msg)) if supplied.is_none() => {
            return Err(Failure::new(EXIT_SYMMETRY_TOO_LARGE, msg));
        }
        Err(Error::TooLarge(_)) => (false, None),
        Err(e) => return Err(e.into()),
    };

    let conclusion = if cyclic.is_some() {
        "uniform optimal for all orthogonally invariant criteria".to_string()
    } else if let Some((_, Some(orbits))) = &supplied {
        format!(
            "some optimal design is constant on each of the {} orbits",
            orbits.orbit_count
        )
    } else if searched {
        "no cyclic invariance found".to_string()
    } else {
        "no symmetry reduction available".to_string()
    };

    let supplied_json = supplied.as_ref().map(|(p, orbits)| {
        json!({
            "one_line": p.one_line(),
            "cycles": p.to_string(),
            "invariant": orbits.is_some(),
            "orbit_count": orbits.as_ref().map(|o| o.orbit_count),
            "orbits": orbits.as_ref().map(one_indexed_orbits),
        })
    });
    report.symmetry = Some(json!({
        "searched": searched,
        "cyclic": cyclic.as_ref().map(|p| p.to_string()),
        "cyclic_one_line": cyclic.as_ref().map(|p| p.one_line()),
        "permutation": supplied_json,
        "uniform_optimal": cyclic.is_some(),
        "conclusion": conclusion,
    }));
    Ok(Outcome::ok(report))
}

fn oracle_too_large(e: Error) -> Failure {
    match e {
        Error::TooLarge(msg) => Failure::new(EXIT_ORACLE_TOO_LARGE, msg),
        other => other.into(),
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn oracle(
    common: &Common,
    mode: OracleMode,
    w: Option<&str>,
    p: CriterionP,
    step: f64,
) -> CmdResult {
    let loaded = load_system(&common.q)?;
    let eval = Evaluator::with_rank_tol(&loaded.sys, common.rank_tol);
    let mut report;
    match mode {
        OracleMode::Kappa => {
            report = start_report("oracle", common);
            report.input("mode", "kappa");
            let g = loaded.graph.as_ref().ok_or_else(|| {
                Failure::new(EXIT_OTHER, "the kappa oracle needs a pairwise system")
            })?;
            let design = match w {
                Some(weights_arg) => {
                    report.input("w", weights_arg);
                    to_design(load_weights(weights_arg)?, loaded.sys.v())?
                }
                None => Design::uniform(loaded.sys.v()),
            };
            let check = verify_d_identity(g, &design, eval.rank()).map_err(oracle_too_large)?;
            describe(&mut report, &loaded, &eval, &design, CriterionP::D)?;
            let mut value = serde_json::to_value(&check).expect("report is serializable");
            value["mode"] = json!("kappa");
            report.oracle = Some(value);
        }
        OracleMode::Grid => {
            report = start_report("oracle", common);
            report.input("mode", "grid");
            report.input("p", p);
            report.input("grid_step", step);
            let grid = grid_oracle(&loaded.sys, p, step).map_err(oracle_too_large)?;
            let (ref_method, reference) =
                match closed_form(&loaded, p, eval.rank(), common.rank_tol)? {
                    Some(res) => (method_name(res.method), res.design),
                    None => {
                        let opts = OptimizeOptions {
                            rank_tol: common.rank_tol,
                            ..Default::default()
                        };
                        let res = match optimize_phi_p(&loaded.sys, p, &opts) {
                            Ok(r) => r,
                            Err(Error::NotConverged(r)) => *r,
                            Err(e) => return Err(e.into()),
                        };
                        ("numeric".to_string(), res.design)
                    }
                };
            let reference_psi = eval.evaluate(&reference, p)?.psi;
            let diff = max_diff(grid.design.weights(), reference.weights());
            let nearest_tie = grid
                .ties
                .iter()
                .map(|t| max_diff(t.weights(), reference.weights()))
                .fold(f64::INFINITY, f64::min);
            describe(&mut report, &loaded, &eval, &grid.design, p)?;
            report.oracle = Some(json!({
                "mode": "grid",
                "step": step,
                "points": grid.points,
                "ties": grid.ties.len(),
                "grid_psi": grid.criterion.psi,
                "reference_method": ref_method,
                "reference_design": reference.weights(),
                "reference_psi": reference_psi,
                "max_coord_diff": diff,
                "nearest_tie_diff": nearest_tie,
                "within_one_step": nearest_tie <= step * (1.0 + 1e-9),
            }));
        }
    }
    Ok(Outcome::ok(report))
}

pub fn export_dot(q: &Path, w: Option<&str>, output: &Path) -> CmdResult {
    let loaded = load_system(q)?;
    let g = loaded.graph.as_ref().ok_or_else(|| {
        Failure::new(
            EXIT_OTHER,
            "export-dot needs a pairwise system of comparisons",
        )
    })?;
    let mut report = RunReport::new("export-dot");
    report.input("q", q.display());
    report.input("output", output.display());
    let design = match w {
        Some(weights_arg) => {
            report.input("w", weights_arg);
            Some(to_design(load_weights(weights_arg)?, g.v())?)
        }
        None => None,
    };
    let alphas = design.as_ref().map(Design::alphas);
    fs::write(output, dot::render(g, alphas.as_deref())).map_err(|e| {
        Failure::new(
            EXIT_OTHER,
            format!("cannot write {}: {e}", output.display()),
        )
    })?;
    report.design = design.map(Design::into_inner);
    Ok(Outcome::ok(report))
}
