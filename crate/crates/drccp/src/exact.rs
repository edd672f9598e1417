//! Exact worst-case violation certification over the ambiguity ball.
//!
//! The worst-case probability of `F(x,ξ) > 0` over all distributions within
//! Wasserstein distance θ of the empirical distribution reduces to a
//! one-dimensional convex dual in the multiplier λ,
//!
//! ```text
//! h(λ) = λ θ^p + (1/N) Σ_i max(1 − λ G_i, 0),
//! ```
//!
//! where `G_i` is the d^p-distance from sample i to the closure of the
//! violating set. `h` is piecewise linear with breakpoints `1/G_i`, so the
//! minimum is found by exact enumeration. A discrete-support transport LP
//! provides the primal counterpart used as an independent oracle.

use crate::conic::{self, ConicProgram, SolveStatus};
use crate::constraints::{
    distance_to_violation, ConstraintError, ConstraintFunction, GridConfig, PolyhedralSupport,
};
use crate::prob::{empirical_cvar, ProbError, SampleSet, Tolerances, WassersteinOrder};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("solver failure: {0}")]
    Solver(String),
}

fn serialize_extended<S: Serializer>(v: &Vec<f64>, s: S) -> Result<S::Ok, S::Error> {
    // +inf has no JSON encoding; emit null for "no violating realization"
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        if x.is_finite() {
            seq.serialize_element(&Some(x))?;
        } else {
            seq.serialize_element(&Option::<f64>::None)?;
        }
    }
    seq.end()
}

/// Certificate for the worst-case violation probability at a fixed decision.
#[derive(Debug, Clone, Serialize)]
pub struct ExactCertificate {
    /// sup over the ambiguity ball of P(F(x,ξ) > 0), in [0,1].
    pub worst_case_probability: f64,
    /// Minimizing dual multiplier; `None` on the θ = 0 route.
    pub lambda_star: Option<f64>,
    /// Dual breakpoints examined (including λ = 0).
    pub breakpoints: Vec<f64>,
    /// Per-sample distances G_i to the violating set (`null` in JSON for +∞).
    #[serde(serialize_with = "serialize_extended")]
    pub g_values: Vec<f64>,
    /// Set when any G_i came from the grid fallback.
    pub approximate: bool,
    /// Worst grid resolution used, when approximate.
    pub grid_resolution: Option<f64>,
}

/// Minimum of the dual `h(λ)` by breakpoint enumeration.
///
/// Distances below 1e-12 are treated as exact zeros; ties between
/// breakpoints resolve toward the smaller λ. Exposed so grid-restricted
/// distances can be run through the same exact dual.
pub fn dual_from_distances(g_values: &[f64], theta_p: f64) -> (f64, f64, Vec<f64>) {
    assert!(theta_p > 0.0, "dual requires a positive radius");
    let n = g_values.len() as f64;
    let g: Vec<f64> = g_values
        .iter()
        .map(|&v| if v < 1e-12 { 0.0 } else { v })
        .collect();
    let h = |lambda: f64| -> f64 {
        let mut s = 0.0;
        for &gi in &g {
            if gi == 0.0 {
                s += 1.0;
            } else if gi.is_finite() {
                s += (1.0 - lambda * gi).max(0.0);
            }
            // gi = +inf contributes 0
        }
        lambda * theta_p + s / n
    };
    let mut breakpoints: Vec<f64> = vec![0.0];
    for &gi in &g {
        if gi > 0.0 && gi.is_finite() {
            breakpoints.push(1.0 / gi);
        }
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut best_lambda = 0.0;
    let mut best = h(0.0);
    for &bp in &breakpoints[1..] {
        let v = h(bp);
        if v < best - 1e-15 {
            best = v;
            best_lambda = bp;
        }
    }
    (best.clamp(0.0, 1.0), best_lambda, breakpoints)
}

fn compute_g_values(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    p: WassersteinOrder,
    support: &PolyhedralSupport,
    grid: &GridConfig,
) -> Result<(Vec<f64>, bool, Option<f64>), ExactError> {
    let mut g = Vec::with_capacity(samples.len());
    let mut approximate = false;
    let mut worst_res: Option<f64> = None;
    for xi_hat in samples.samples() {
        let d = distance_to_violation(f, x, xi_hat, p, support, grid)?;
        if let Some(res) = d.grid_resolution {
            approximate = true;
            worst_res = Some(worst_res.map_or(res, |w: f64| w.max(res)));
        }
        g.push(d.value);
    }
    Ok((g, approximate, worst_res))
}

/// Exact worst-case violation probability of `F(x,ξ) > 0` over the ambiguity
/// ball of radius θ.
///
/// θ = 0 is routed to the empirical violation fraction (the ball is the
/// singleton empirical distribution).
pub fn worst_case_violation(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    theta: f64,
    p: WassersteinOrder,
    support: &PolyhedralSupport,
    grid: &GridConfig,
) -> Result<ExactCertificate, ExactError> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(ExactError::Invalid(format!("theta must be >= 0, got {theta}")));
    }
    if x.len() != f.x_dim() {
        return Err(ExactError::Invalid("decision dimension mismatch".into()));
    }
    if theta == 0.0 {
        let violated = samples
            .samples()
            .iter()
            .filter(|s| f.eval(x, s) > 0.0)
            .count();
        return Ok(ExactCertificate {
            worst_case_probability: violated as f64 / samples.len() as f64,
            lambda_star: None,
            breakpoints: Vec::new(),
            g_values: Vec::new(),
            approximate: false,
            grid_resolution: None,
        });
    }
    let (g, approximate, grid_resolution) = compute_g_values(x, f, samples, p, support, grid)?;
    let theta_p = theta.powf(p.exponent());
    let (prob, lambda, breakpoints) = dual_from_distances(&g, theta_p);
    Ok(ExactCertificate {
        worst_case_probability: prob,
        lambda_star: Some(lambda),
        breakpoints,
        g_values: g,
        approximate,
        grid_resolution,
    })
}

/// Membership in the exact distributionally robust feasibility set:
/// worst-case violation probability at most α (within `feas_tol`).
pub fn membership_dcp(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    theta: f64,
    p: WassersteinOrder,
    alpha: f64,
    support: &PolyhedralSupport,
    grid: &GridConfig,
    tol: &Tolerances,
) -> Result<(bool, ExactCertificate), ExactError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ExactError::Invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let cert = worst_case_violation(x, f, samples, theta, p, support, grid)?;
    Ok((cert.worst_case_probability <= alpha + tol.feas_tol, cert))
}

/// CVaR form of the same membership test: `θ^p/α + CVaR_{1−α}(−G) ≤ 0`.
///
/// Requires every sample to have a nonempty violating set (all G_i finite);
/// the sign of the returned value agrees with [`membership_dcp`].
pub fn cvar_form_value(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    theta: f64,
    p: WassersteinOrder,
    alpha: f64,
    support: &PolyhedralSupport,
    grid: &GridConfig,
) -> Result<f64, ExactError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ExactError::Invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if theta <= 0.0 {
        return Err(ExactError::Invalid("CVaR form needs theta > 0".into()));
    }
    let (g, _, _) = compute_g_values(x, f, samples, p, support, grid)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(ExactError::Precondition(
            "a sample has an empty violating set (G = +inf); the CVaR form is undefined".into(),
        ));
    }
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let theta_p = theta.powf(p.exponent());
    Ok(theta_p / alpha + empirical_cvar(&neg_g, alpha)?)
}

/// Worst-case violation probability restricted to distributions supported on
/// a finite grid, solved as a transport LP. The grid must contain every
/// sample; this is the independent primal oracle for [`dual_from_distances`].
pub fn brute_force_worst_case(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    theta: f64,
    p: WassersteinOrder,
    grid_points: &[Vec<f64>],
) -> Result<f64, ExactError> {
    if grid_points.is_empty() {
        return Err(ExactError::Invalid("empty grid".into()));
    }
    for s in samples.samples() {
        let found = grid_points
            .iter()
            .any(|g| g.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-12));
        if !found {
            return Err(ExactError::Precondition(
                "grid must contain every sample".into(),
            ));
        }
    }
    let n = samples.len();
    let j = grid_points.len();
    let violating: Vec<bool> = grid_points.iter().map(|g| f.eval(x, g) > 0.0).collect();
    let mut prog = ConicProgram::new(n * j);
    let mut obj = vec![0.0; n * j];
    for (jj, &v) in violating.iter().enumerate() {
        if v {
            for i in 0..n {
                obj[i * j + jj] = -1.0; // maximize transported violating mass
            }
        }
    }
    prog.set_objective(obj);
    for idx in 0..n * j {
        prog.set_bounds(idx, 0.0, f64::INFINITY);
    }
    for i in 0..n {
        let mut row = vec![0.0; n * j];
        for jj in 0..j {
            row[i * j + jj] = 1.0;
        }
        prog.add_eq(row, 1.0 / n as f64);
    }
    let theta_p = theta.powf(p.exponent());
    let mut budget = vec![0.0; n * j];
    for (i, s) in samples.samples().iter().enumerate() {
        for (jj, g) in grid_points.iter().enumerate() {
            budget[i * j + jj] = p.ground_cost(s, g);
        }
    }
    prog.add_ineq(budget, theta_p);
    let res = conic::solve(&prog, &Tolerances::default())
        .map_err(|e| ExactError::Solver(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(ExactError::Solver(format!(
            "transport LP ended with {:?}",
            res.status
        )));
    }
    Ok((-res.objective).clamp(0.0, 1.0))
}

/// Grid-restricted distances: min d^p over violating grid points, +∞ when no
/// grid point violates. Feeding these into [`dual_from_distances`] gives the
/// exact dual of [`brute_force_worst_case`].
pub fn grid_restricted_distances(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    p: WassersteinOrder,
    grid_points: &[Vec<f64>],
) -> Vec<f64> {
    samples
        .samples()
        .iter()
        .map(|s| {
            grid_points
                .iter()
                .filter(|g| f.eval(x, g) > 0.0)
                .map(|g| p.ground_cost(s, g))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
