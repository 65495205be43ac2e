//! `odg`: evaluate and optimise treatment designs for systems of contrasts.
//!
//! Every command prints one JSON document on stdout; diagnostics go to
//! stderr. Exit codes: 0 success, 1 other error, 2 parse error, 3 infeasible
//! design, 4 optimizer did not converge (the JSON is still printed),
//! 5 invalid permutation, 6 symmetry search too large, 7 oracle too large.

mod commands;
mod dot;
mod exit;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use odg_core::{CriterionP, DEFAULT_RANK_TOL};

#[derive(Parser)]
#[command(
    name = "odg",
    version,
    about = "Optimal designs for treatment contrasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Contrast matrix (CSV, one row per treatment) or edge list (`v=<n>`
    /// header, then one `j i` pair per line for `tau_j - tau_i`).
    #[arg(long)]
    pub q: PathBuf,
    /// Relative tolerance for the rank of Q.
    #[arg(long, env = "ODG_RANK_TOL", default_value_t = DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a design.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Weights as a CSV file or an inline list; rescaled to sum to one.
        #[arg(long)]
        w: String,
        /// Criterion exponent: a number <= 0 or `neg-inf`.
        #[arg(long, allow_hyphen_values = true)]
        p: CriterionP,
    },
    /// Find an optimal design.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        p: CriterionP,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Stationarity tolerance of the numeric optimizer.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Jitter the numeric starting design with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Invariant permutation in one-line notation, e.g. "2 1 4 5 3".
        #[arg(long)]
        perm: Option<String>,
    },
    /// Look for permutations leaving Q Q^T invariant.
    Symmetry {
        #[command(flatten)]
        common: Common,
        /// Largest v for the exhaustive cyclic search.
        #[arg(long, default_value_t = odg_core::symmetry::DEFAULT_MAX_V)]
        max_v: usize,
        #[arg(long)]
        perm: Option<String>,
    },
    /// Independent checks: forest enumeration or a lattice search.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: OracleMode,
        /// Design for the kappa check; uniform when omitted.
        #[arg(long)]
        w: Option<String>,
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        p: CriterionP,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
    /// Write the comparison graph in Graphviz DOT format.
    ExportDot {
        #[arg(long)]
        q: PathBuf,
        /// Label vertices with alpha = 1/w.
        #[arg(long)]
        w: Option<String>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Method {
    Closed,
    Numeric,
    Auto,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum OracleMode {
    Kappa,
    Grid,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval { common, w, p } => commands::eval(&common, &w, p),
        Command::Optimize {
            common,
            p,
            method,
            tol,
            max_iter,
            seed,
            perm,
        } => commands::optimize(
            &common,
            p,
            method,
            commands::NumericArgs {
                tol,
                max_iter,
                seed,
            },
            perm.as_deref(),
        ),
        Command::Symmetry {
            common,
            max_v,
            perm,
        } => commands::symmetry(&common, max_v, perm.as_deref()),
        Command::Oracle {
            common,
            mode,
            w,
            p,
            grid_step,
        } => commands::oracle(&common, mode, w.as_deref(), p, grid_step),
        Command::ExportDot { q, w, output } => commands::export_dot(&q, w.as_deref(), &output),
    };
    match outcome {
        Ok(out) => {
            if let Some(report) = &out.report {
                println!("{}", report.to_json());
            }
            if let Some(msg) = &out.warning {
                eprintln!("odg: {msg}");
            }
            ExitCode::from(out.code as u8)
        }
        Err(failure) => {
            eprintln!("odg: {failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
