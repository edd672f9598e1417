//! Subcommand implementations. Each returns the process exit code.

use crate::problem::{CliError, Problem};
use crate::report::{self, InputDigest, RunReport, Timings, ToolInfo};
use drccp::constraints::{check_subgradients, lipschitz_xi_bound, ConstraintFunction};
use drccp::cutting::{run_cutting_surface, CuttingError};
use drccp::exact;
use drccp::prob::{wasserstein_distance, DiscreteDistribution, WassersteinOrder};
use drccp::reformulate::{
    self, compare_sets, estimate_t_star, membership_cdcp, membership_inner,
    membership_sample_approx, membership_scenario, ReformulateError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::Path;
use std::time::Instant;

/// Expands the run seed into per-subsystem streams (splitmix-style).
fn subseed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    CvarConic,
    Cutting,
    Inner,
    Scenario,
}

impl SolveMethod {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "cvar-conic" => Ok(SolveMethod::CvarConic),
            "cutting" => Ok(SolveMethod::Cutting),
            "inner" => Ok(SolveMethod::Inner),
            "scenario" => Ok(SolveMethod::Scenario),
            other => Err(CliError::Schema(format!(
                "unknown method {other:?}; expected cvar-conic|cutting|inner|scenario"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            SolveMethod::CvarConic => "cvar-conic",
            SolveMethod::Cutting => "cutting",
            SolveMethod::Inner => "inner",
            SolveMethod::Scenario => "scenario",
        }
    }
}

fn map_reformulate(e: ReformulateError) -> CliError {
    use drccp::conic::SolveStatus;
    match e {
        ReformulateError::Solve(SolveStatus::Infeasible) => {
            CliError::Infeasible("program is infeasible".into())
        }
        ReformulateError::Solve(SolveStatus::IterationLimit)
        | ReformulateError::Solve(SolveStatus::NumericalError) => {
            CliError::NonConvergence(format!("{e}"))
        }
        ReformulateError::RequiresOrderOne => CliError::Incompatible(format!("{e}")),
        other => CliError::Other(format!("{other}")),
    }
}

fn map_cutting(e: CuttingError) -> CliError {
    match e {
        CuttingError::RequiresConcave | CuttingError::SupportNotCompact => {
            CliError::Incompatible(format!("{e}"))
        }
        CuttingError::MasterInfeasible(_) => CliError::Infeasible(format!("{e}")),
        CuttingError::NoIncumbent => CliError::NonConvergence(format!("{e}")),
        other => CliError::Other(format!("{other}")),
    }
}

fn require_piecewise(problem: &Problem, method: &str) -> Result<(), CliError> {
    if problem.piecewise().is_none() {
        return Err(CliError::Incompatible(format!(
            "method {method} needs a piecewise-bilinear constraint, not a black-box oracle"
        )));
    }
    Ok(())
}

fn parameters_value(problem: &Problem) -> Value {
    json!({
        "theta": problem.theta,
        "p": problem.p.exponent(),
        "alpha": problem.alpha,
        "delta": problem.delta,
        "tolerances": problem.tolerances,
        "eta": problem.algo.eta,
    })
}

pub struct CommonArgs {
    pub seed: u64,
    pub out_dir: std::path::PathBuf,
    pub embed_samples: bool,
}

pub fn cmd_solve(
    problem: &mut Problem,
    method: SolveMethod,
    args: &CommonArgs,
) -> Result<i32, CliError> {
    let started = Instant::now();
    problem.algo.seed = subseed(args.seed, 1);
    let mut exit = 0;
    let result: Value = match method {
        SolveMethod::CvarConic => {
            require_piecewise(problem, method.name())?;
            let sol = reformulate::solve_cvar_drccp(
                problem.piecewise().unwrap(),
                &problem.samples,
                problem.theta,
                problem.alpha,
                &problem.support,
                &problem.objective,
                &problem.x_set,
                problem.p,
                &problem.tolerances,
            )
            .map_err(map_reformulate)?;
            json!({ "solution": sol })
        }
        SolveMethod::Inner => {
            require_piecewise(problem, method.name())?;
            if problem.p != WassersteinOrder::One {
                return Err(CliError::Incompatible(
                    "the inner approximation needs the 1-Wasserstein metric".into(),
                ));
            }
            let sol = reformulate::solve_inner_cdcp(
                problem.piecewise().unwrap(),
                &problem.samples,
                problem.theta,
                problem.alpha,
                &problem.objective,
                &problem.x_set,
                &problem.tolerances,
            )
            .map_err(map_reformulate)?;
            json!({ "solution": sol })
        }
        SolveMethod::Scenario => {
            require_piecewise(problem, method.name())?;
            let sol = reformulate::solve_scenario(
                problem.piecewise().unwrap(),
                &problem.samples,
                problem.delta,
                &problem.objective,
                &problem.x_set,
                &problem.tolerances,
            )
            .map_err(map_reformulate)?;
            json!({ "solution": sol })
        }
        SolveMethod::Cutting => {
            require_piecewise(problem, method.name())?;
            let f = problem.piecewise().unwrap();
            if !f.concave_in_xi() {
                return Err(CliError::Incompatible(
                    "the cutting-surface method needs a constraint concave in the uncertainty"
                        .into(),
                ));
            }
            let out = run_cutting_surface(
                f,
                &problem.samples,
                problem.theta,
                problem.p,
                problem.alpha,
                &problem.objective,
                &problem.x_set,
                &problem.support,
                &problem.algo,
                &problem.tolerances,
            )
            .map_err(map_cutting)?;
            // trace CSV next to the report
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["k", "upper_bound", "sigma", "total_cuts", "wall_secs"])
                .map_err(|e| CliError::Other(e.to_string()))?;
            for r in &out.trace {
                w.write_record([
                    r.k.to_string(),
                    format!("{:.12e}", r.upper_bound),
                    format!("{:.12e}", r.sigma),
                    r.total_cuts.to_string(),
                    format!("{:.6}", r.wall_secs),
                ])
                .map_err(|e| CliError::Other(e.to_string()))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Other(e.to_string()))?;
            report::write_atomic(&args.out_dir.join("cutting_trace.csv"), &bytes)?;
            if !out.converged {
                exit = 3;
            }
            json!({
                "solution": out.solution,
                "converged": out.converged,
                "weak_certificate": out.weak_certificate,
                "iterations": out.iterations,
                "bounds": out.bounds,
                "subgradient_bound": out.b,
                "trace_rows": out.trace.len(),
            })
        }
    };

    let report = RunReport {
        tool: ToolInfo::default(),
        command: "solve".into(),
        method: Some(method.name().into()),
        seed: args.seed,
        input: report::input_digest(problem, args.embed_samples),
        parameters: parameters_value(problem),
        result,
        timings: Timings {
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    let path = report::write_report(&args.out_dir, "solve_report.json", &report)?;
    let objective = report
        .result
        .pointer("/solution/objective")
        .and_then(Value::as_f64)
        .unwrap_or(f64::NAN);
    println!("method {}: objective {objective:.9}", method.name());
    println!("report written to {}", path.display());
    Ok(exit)
}

fn certificate_value(cert: &exact::ExactCertificate) -> Value {
    serde_json::to_value(cert).unwrap_or(Value::Null)
}

pub fn cmd_certify(problem: &Problem, x: &[f64], args: &CommonArgs) -> Result<i32, CliError> {
    let started = Instant::now();
    if x.len() != problem.constraint.x_dim() {
        return Err(CliError::Schema(format!(
            "candidate has dimension {}, constraint expects {}",
            x.len(),
            problem.constraint.x_dim()
        )));
    }
    let tol = &problem.tolerances;
    let in_domain = problem.x_set.contains(x, tol.feas_tol);
    let result = if !in_domain {
        json!({
            "x": x,
            "in_domain": false,
            "verdicts": {
                "dcp": false, "cdcp": false, "inner": false,
                "scenario0": false, "sample_approx0": false,
            },
            "note": "candidate lies outside X; all memberships are false",
        })
    } else {
        let (dcp_member, cert) = exact::membership_dcp(
            x,
            &problem.constraint,
            &problem.samples,
            problem.theta,
            problem.p,
            problem.alpha,
            &problem.support,
            &problem.grid,
            tol,
        )
        .map_err(|e| CliError::Other(e.to_string()))?;
        // Lipschitz bound: interval bound for the tractable class, declared
        // constant for oracles
        let (l_f, l_f_source) = match &problem.constraint {
            ConstraintFunction::Piecewise(f) => {
                if problem.x_set.bounded() {
                    (
                        lipschitz_xi_bound(f, &problem.x_set)
                            .map_err(|e| CliError::Other(e.to_string()))?,
                        "interval-bound",
                    )
                } else {
                    (f.lipschitz_xi_at(x), "pointwise")
                }
            }
            ConstraintFunction::Oracle(o) => (o.lipschitz_xi(), "declared"),
        };
        let (inner_member, inner_value) = membership_inner(
            x,
            &problem.constraint,
            l_f,
            &problem.samples,
            problem.theta,
            problem.alpha,
            tol,
        )
        .map_err(|e| CliError::Other(e.to_string()))?;
        let cdcp = match problem.piecewise() {
            Some(f) if problem.p == WassersteinOrder::One => {
                let (member, value) = membership_cdcp(
                    x,
                    f,
                    &problem.samples,
                    problem.theta,
                    problem.alpha,
                    &problem.support,
                    tol,
                )
                .map_err(map_reformulate)?;
                json!({"member": member, "value": value})
            }
            _ => Value::Null,
        };
        let (scp0, scp0_value) = membership_scenario(x, &problem.constraint, &problem.samples, 0.0);
        let (sa0, sa0_fraction) =
            membership_sample_approx(x, &problem.constraint, &problem.samples, 0.0);
        let ex_post = if scp0 {
            reformulate::ex_post_threshold(
                x,
                &problem.constraint,
                &problem.samples,
                problem.alpha,
                l_f,
                tol,
            )
            .ok()
            .map(|t| serde_json::to_value(&t).unwrap_or(Value::Null))
        } else {
            None
        };
        json!({
            "x": x,
            "in_domain": true,
            "verdicts": {
                "dcp": dcp_member,
                "cdcp": cdcp.pointer("/member").cloned().unwrap_or(Value::Null),
                "inner": inner_member,
                "scenario0": scp0,
                "sample_approx0": sa0,
            },
            "worst_case_certificate": certificate_value(&cert),
            "cdcp_detail": cdcp,
            "inner_value": inner_value,
            "lipschitz": {"value": l_f, "source": l_f_source},
            "scenario0_value": scp0_value,
            "sample_approx0_fraction": sa0_fraction,
            "ex_post": ex_post,
        })
    };
    let report = RunReport {
        tool: ToolInfo::default(),
        command: "certify".into(),
        method: None,
        seed: args.seed,
        input: report::input_digest(problem, args.embed_samples),
        parameters: parameters_value(problem),
        result,
        timings: Timings {
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    let path = report::write_report(&args.out_dir, "certify_report.json", &report)?;
    let wc = report
        .result
        .pointer("/worst_case_certificate/worst_case_probability")
        .and_then(Value::as_f64);
    match wc {
        Some(p) => println!("worst-case violation probability {p:.9}"),
        None => println!("candidate outside X"),
    }
    println!("report written to {}", path.display());
    Ok(0)
}

pub fn cmd_compare(
    problem: &Problem,
    candidate_count: usize,
    args: &CommonArgs,
) -> Result<i32, CliError> {
    let started = Instant::now();
    let f = problem
        .piecewise()
        .ok_or_else(|| {
            CliError::Incompatible("compare needs a piecewise-bilinear constraint".into())
        })?;
    if problem.p != WassersteinOrder::One {
        return Err(CliError::Incompatible(
            "compare uses the 1-Wasserstein inner approximation".into(),
        ));
    }
    let boxr: Vec<(f64, f64)> = {
        let b = problem.x_set.box_bounds();
        if b.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite()) {
            b.to_vec()
        } else {
            problem
                .x_set
                .coord_ranges()
                .ok_or_else(|| {
                    CliError::Incompatible("compare needs a bounded decision set".into())
                })?
                .to_vec()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(args.seed, 2));
    let candidates: Vec<Vec<f64>> = (0..candidate_count)
        .map(|_| {
            boxr.iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect()
        })
        .collect();
    let l_f = lipschitz_xi_bound(f, &problem.x_set).map_err(|e| CliError::Other(e.to_string()))?;
    let (t_star, t_method) = estimate_t_star(f, &problem.x_set, &problem.support, &problem.grid)
        .map_err(|e| CliError::Incompatible(e.to_string()))?;
    if t_star <= 0.0 {
        return Err(CliError::Incompatible(format!(
            "sup(-F) = {t_star:.3e} is not positive; the comparison margins are undefined"
        )));
    }
    let report_data = compare_sets(
        &candidates,
        f,
        &problem.samples,
        problem.theta,
        problem.alpha,
        &problem.support,
        &problem.x_set,
        l_f,
        t_star,
        &problem.tolerances,
        &problem.grid,
    )
    .map_err(map_reformulate)?;

    // CSV table: one row per candidate, one column per set
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..f.x_dim()).map(|j| format!("x{j}")).collect();
    header.extend(
        [
            "in_domain",
            "scenario_delta2",
            "inner",
            "sample_approx_delta1",
            "cdcp",
            "dcp",
            "ex_post_threshold",
        ]
        .map(String::from),
    );
    w.write_record(&header)
        .map_err(|e| CliError::Other(e.to_string()))?;
    for c in &report_data.candidates {
        let mut row: Vec<String> = c.x.iter().map(|v| format!("{v:.12e}")).collect();
        row.push(c.in_domain.to_string());
        row.push(c.scenario_delta2.to_string());
        row.push(c.inner.to_string());
        row.push(
            c.sample_approx_delta1
                .map(|b| b.to_string())
                .unwrap_or_else(|| "skipped".into()),
        );
        row.push(c.cdcp.to_string());
        row.push(c.dcp.to_string());
        row.push(
            c.ex_post_threshold
                .map(|t| format!("{t:.12e}"))
                .unwrap_or_default(),
        );
        w.write_record(&row)
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    report::write_atomic(&args.out_dir.join("compare_table.csv"), &bytes)?;

    let result = json!({
        "delta1": report_data.delta1,
        "delta2": report_data.delta2,
        "t_star": t_star,
        "t_star_method": t_method,
        "lipschitz": l_f,
        "candidate_count": candidate_count,
        "inclusion_violations": report_data.inclusion_violations,
        "sample_approx_skipped": report_data.sample_approx_skipped,
    });
    let report = RunReport {
        tool: ToolInfo::default(),
        command: "compare".into(),
        method: None,
        seed: args.seed,
        input: report::input_digest(problem, args.embed_samples),
        parameters: parameters_value(problem),
        result,
        timings: Timings {
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    let path = report::write_report(&args.out_dir, "compare_report.json", &report)?;
    if report_data.sample_approx_skipped {
        eprintln!(
            "warning: delta1 = {:.6} < 0 (radius too large); sample-approximation column skipped",
            report_data.delta1
        );
    }
    println!(
        "{} candidates, {} inclusion violations",
        candidate_count, report_data.inclusion_violations
    );
    println!("report written to {}", path.display());
    Ok(0)
}

pub fn cmd_wasserstein(
    mu_path: &Path,
    nu_path: &Path,
    p: f64,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let started = Instant::now();
    let order = WassersteinOrder::from_f64(p).map_err(|e| CliError::Schema(e.to_string()))?;
    let load = |path: &Path| -> Result<(DiscreteDistribution, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
        let d = DiscreteDistribution::from_json_str(&String::from_utf8_lossy(&bytes))
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        Ok((d, bytes))
    };
    let (mu, mu_bytes) = load(mu_path)?;
    let (nu, nu_bytes) = load(nu_path)?;
    let d = wasserstein_distance(&mu, &nu, order).map_err(|e| CliError::Other(e.to_string()))?;
    use sha2::{Digest, Sha256};
    let hex = |b: &[u8]| hex::encode(Sha256::digest(b));
    let report = RunReport {
        tool: ToolInfo::default(),
        command: "wasserstein".into(),
        method: None,
        seed: 0,
        input: InputDigest {
            problem_path: mu_path.display().to_string(),
            problem_sha256: hex(&mu_bytes),
            samples_path: nu_path.display().to_string(),
            samples_sha256: hex(&nu_bytes),
            embedded_samples: None,
        },
        parameters: json!({"p": p}),
        result: json!({"distance": d}),
        timings: Timings {
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    let path = report::write_report(out_dir, "wasserstein_report.json", &report)?;
    println!("W_{p}(mu, nu) = {d:.12}");
    println!("report written to {}", path.display());
    Ok(0)
}

pub fn cmd_oracle_check(
    problem: &Problem,
    points: usize,
    rel_tol: f64,
    args: &CommonArgs,
) -> Result<i32, CliError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(args.seed, 3));
    let xr: Vec<(f64, f64)> = problem
        .x_set
        .coord_ranges()
        .map(|r| r.to_vec())
        .unwrap_or_else(|| vec![(-5.0, 5.0); problem.constraint.x_dim()]);
    let sr: Vec<(f64, f64)> = problem
        .support
        .coord_ranges()
        .map(|r| r.to_vec())
        .unwrap_or_else(|| {
            vec![
                (
                    -problem.grid.free_half_width,
                    problem.grid.free_half_width
                );
                problem.constraint.xi_dim()
            ]
        });
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..points)
        .map(|_| {
            (
                xr.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect(),
                sr.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect(),
            )
        })
        .collect();
    let outcome = check_subgradients(&problem.constraint, &pts, rel_tol);
    let (passed, detail) = match &outcome {
        Ok(rep) => (
            true,
            json!({
                "points_checked": rep.points_checked,
                "points_skipped": rep.points_skipped,
                "worst_rel_error": rep.worst_rel_error,
            }),
        ),
        Err(e) => (false, json!({"error": e.to_string()})),
    };
    let report = RunReport {
        tool: ToolInfo::default(),
        command: "oracle-check".into(),
        method: None,
        seed: args.seed,
        input: report::input_digest(problem, args.embed_samples),
        parameters: json!({"points": points, "rel_tol": rel_tol, "fd_step": 1e-6}),
        result: json!({"passed": passed, "detail": detail}),
        timings: Timings {
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    let path = report::write_report(&args.out_dir, "oracle_check_report.json", &report)?;
    println!(
        "oracle check {}",
        if passed { "passed" } else { "FAILED" }
    );
    println!("report written to {}", path.display());
    Ok(if passed { 0 } else { 1 })
}
