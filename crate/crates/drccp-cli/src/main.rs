//! Command-line interface for data-driven distributionally robust
//! chance-constrained programs: solvers, certification, feasibility-set
//! comparison, Wasserstein distances, and oracle validation.

mod commands;
mod oracles;
mod problem;
mod report;

use clap::{Args, Parser, Subcommand};
use commands::{CommonArgs, SolveMethod};
use problem::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "drccp",
    version,
    about = "Distributionally robust chance-constrained programs over Wasserstein ambiguity balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Ambiguity radius override.
    #[arg(long)]
    theta: Option<f64>,
    /// Violation level override.
    #[arg(long)]
    alpha: Option<f64>,
    /// Base seed; expanded per subsystem and recorded in the report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for reports and traces.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Embed the parsed samples in the report (self-contained certification).
    #[arg(long)]
    embed_samples: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the program with the chosen method.
    Solve {
        #[command(flatten)]
        shared: Shared,
        /// cvar-conic | cutting | inner | scenario
        #[arg(long)]
        method: String,
        /// Scenario margin override.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Certify memberships of a fixed decision across every feasibility set.
    Certify {
        #[command(flatten)]
        shared: Shared,
        /// Decision vector, comma separated (e.g. "1.5,0.3").
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Sample candidates from the decision box and compare feasibility sets.
    Compare {
        #[command(flatten)]
        shared: Shared,
        /// Number of candidates to sample.
        #[arg(long, default_value_t = 1000)]
        candidates: usize,
    },
    /// Wasserstein distance between two discrete distributions (JSON files).
    Wasserstein {
        /// First distribution {atoms, weights}.
        #[arg(long)]
        mu: PathBuf,
        /// Second distribution {atoms, weights}.
        #[arg(long)]
        nu: PathBuf,
        /// Order (1 or 2).
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Validate constraint subgradients against finite differences.
    OracleCheck {
        #[command(flatten)]
        shared: Shared,
        /// Number of random evaluation points.
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Relative tolerance of the comparison.
        #[arg(long, default_value_t = 1e-4)]
        rel_tol: f64,
    },
}

fn apply_overrides(
    p: &mut problem::Problem,
    theta: Option<f64>,
    alpha: Option<f64>,
) -> Result<(), CliError> {
    if let Some(t) = theta {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(CliError::Schema(format!("theta must be >= 0, got {t}")));
        }
        p.theta = t;
    }
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Schema(format!("alpha must lie in (0,1), got {a}")));
        }
        p.alpha = a;
    }
    Ok(())
}

fn parse_vector(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Schema(format!("bad component {c:?}: {e}")))
        })
        .collect()
}

fn setup_threads() {
    if let Ok(v) = std::env::var("DRCCP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn run() -> Result<i32, CliError> {
    setup_threads();
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            shared,
            method,
            delta,
        } => {
            let method = SolveMethod::parse(&method)?;
            let mut p = problem::load_problem(&shared.problem, shared.seed)?;
            apply_overrides(&mut p, shared.theta, shared.alpha)?;
            if let Some(d) = delta {
                if d < 0.0 {
                    return Err(CliError::Schema(format!("delta must be >= 0, got {d}")));
                }
                p.delta = d;
            }
            commands::cmd_solve(
                &mut p,
                method,
                &CommonArgs {
                    seed: shared.seed,
                    out_dir: shared.out,
                    embed_samples: shared.embed_samples,
                },
            )
        }
        Command::Certify { shared, x } => {
            let mut p = problem::load_problem(&shared.problem, shared.seed)?;
            apply_overrides(&mut p, shared.theta, shared.alpha)?;
            let x = parse_vector(&x)?;
            commands::cmd_certify(
                &p,
                &x,
                &CommonArgs {
                    seed: shared.seed,
                    out_dir: shared.out,
                    embed_samples: shared.embed_samples,
                },
            )
        }
        Command::Compare { shared, candidates } => {
            let mut p = problem::load_problem(&shared.problem, shared.seed)?;
            apply_overrides(&mut p, shared.theta, shared.alpha)?;
            commands::cmd_compare(
                &p,
                candidates,
                &CommonArgs {
                    seed: shared.seed,
                    out_dir: shared.out,
                    embed_samples: shared.embed_samples,
                },
            )
        }
        Command::Wasserstein { mu, nu, p, out } => commands::cmd_wasserstein(&mu, &nu, p, &out),
        Command::OracleCheck {
            shared,
            points,
            rel_tol,
        } => {
            let mut p = problem::load_problem(&shared.problem, shared.seed)?;
            apply_overrides(&mut p, shared.theta, shared.alpha)?;
            commands::cmd_oracle_check(
                &p,
                points,
                rel_tol,
                &CommonArgs {
                    seed: shared.seed,
                    out_dir: shared.out,
                    embed_samples: shared.embed_samples,
                },
            )
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
