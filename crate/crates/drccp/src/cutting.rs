//! Central cutting-surface method for the semi-infinite worst-case CVaR
//! program over a compact support.
//!
//! The semi-infinite constraints `s_i ≥ F(x,ξ) + t − λ d^p(ξ,ξ̂_i)` (one per
//! uncertainty realization ξ ∈ Ξ and sample i) are handled by a master LP
//! over accumulated cut points and a separation oracle that maximizes the
//! concave slack function
//!
//! ```text
//! H_i(y,ξ) = F(x,ξ) + t − λ d^p(ξ,ξ̂_i) − s_i
//! ```
//!
//! over Ξ by multi-start projected supergradient ascent. The master maximizes
//! a centering improvement σ against the current upper bound and the iterates
//! stay in the compact box X × [0,t^M] × [0,λ^M] × [0,s^M]^N.

use crate::conic::{self, dot, ConicProgram, SolveStatus};
use crate::constraints::{
    lipschitz_xi_bound, ConstraintError, GridConfig, GridIter, PiecewiseBilinearConstraint,
    PolyhedralSupport, PolytopeX,
};
use crate::prob::{SampleSet, Tolerances, WassersteinOrder};
use crate::reformulate::{estimate_t_star, DrccpSolution, MethodTag, ReformulateError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CuttingError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("the cutting-surface path needs a constraint concave in the uncertainty (one piece)")]
    RequiresConcave,
    #[error("the support must be a compact polytope")]
    SupportNotCompact,
    #[error("master problem infeasible at iteration {0}")]
    MasterInfeasible(usize),
    #[error("terminated before any η-feasible incumbent was found")]
    NoIncumbent,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Reformulate(#[from] ReformulateError),
}

/// Compact box containing every optimizer of the semi-infinite program.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bounds {
    /// sup over X×Ξ of −F.
    pub sup_neg_f: f64,
    /// t^M = sup(−F)/(1−α).
    pub t_max: f64,
    /// λ^M = α t^M / θ^p (capped through the Lipschitz bound when θ = 0).
    pub lambda_max: f64,
    /// s^M = α N t^M.
    pub s_max: f64,
}

/// Bounds of the iterate box from the sup of −F over X×Ξ.
///
/// With θ = 0 the multiplier bound is vacuous in the master row, so λ^M is
/// capped from the Lipschitz bound instead; any λ at least the Lipschitz
/// constant makes the 1-Wasserstein slack exact at the samples.
pub fn compute_bounds(
    f: &PiecewiseBilinearConstraint,
    x_set: &PolytopeX,
    support: &PolyhedralSupport,
    alpha: f64,
    theta: f64,
    p: WassersteinOrder,
    num_samples: usize,
) -> Result<Bounds, CuttingError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CuttingError::Invalid(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if 1.0 - alpha < 1e-9 {
        return Err(CuttingError::Invalid(
            "alpha too close to 1: t^M diverges".into(),
        ));
    }
    x_set
        .require_bounded()
        .map_err(|_| CuttingError::Invalid("X must be bounded".into()))?;
    if !support.compact() {
        return Err(CuttingError::SupportNotCompact);
    }
    let (sup_neg_f, _) = estimate_t_star(f, x_set, support, &GridConfig::default())?;
    if sup_neg_f <= 0.0 {
        return Err(CuttingError::Invalid(format!(
            "sup(-F) = {sup_neg_f:.3e} <= 0: no robustly feasible point exists"
        )));
    }
    let t_max = sup_neg_f / (1.0 - alpha);
    let lambda_max = if theta > 0.0 {
        alpha * t_max / theta.powf(p.exponent())
    } else {
        let lip = lipschitz_xi_bound(f, x_set)?;
        match p {
            WassersteinOrder::One => 2.0 * lip + 1.0,
            WassersteinOrder::Two => lip * lip / 4e-6 + 1.0,
        }
    };
    Ok(Bounds {
        sup_neg_f,
        t_max,
        lambda_max,
        s_max: alpha * num_samples as f64 * t_max,
    })
}

/// Where the subgradient bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BProvenance {
    Sampled,
    Override,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BEstimate {
    pub value: f64,
    pub provenance: BProvenance,
}

/// Samples subgradients of the slack functions H_i over the iterate box and
/// the support and returns twice the largest norm seen.
pub fn estimate_b(
    f: &PiecewiseBilinearConstraint,
    bounds: &Bounds,
    x_set: &PolytopeX,
    support: &PolyhedralSupport,
    samples: &SampleSet,
    p: WassersteinOrder,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BEstimate, CuttingError> {
    let xr = x_set
        .require_bounded()
        .map_err(|_| CuttingError::Invalid("X must be bounded".into()))?;
    let sr = support
        .coord_ranges()
        .ok_or(CuttingError::SupportNotCompact)?;
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let x: Vec<f64> = xr.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        let xi: Vec<f64> = sr.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        let lambda = rng.gen_range(0.0..=bounds.lambda_max);
        let i = rng.gen_range(0..samples.len());
        let xi_hat = samples.sample(i);
        let diff: Vec<f64> = xi.iter().zip(xi_hat).map(|(a, b)| a - b).collect();
        let dist = dot(&diff, &diff).sqrt();
        let gx = f.x_subgradient(&x, &xi);
        let mut gxi = f.xi_subgradient(&x, &xi);
        match p {
            WassersteinOrder::One => {
                if dist > 1e-14 {
                    for (g, d) in gxi.iter_mut().zip(&diff) {
                        *g -= lambda * d / dist;
                    }
                }
            }
            WassersteinOrder::Two => {
                for (g, d) in gxi.iter_mut().zip(&diff) {
                    *g -= 2.0 * lambda * d;
                }
            }
        }
        let d_p = dist.powf(p.exponent());
        // components: (∂x, ∂t = 1, ∂λ = −d^p, ∂s_i = −1, ∂ξ)
        let norm_sq = dot(&gx, &gx) + 1.0 + d_p * d_p + 1.0 + dot(&gxi, &gxi);
        worst = worst.max(norm_sq.sqrt());
    }
    Ok(BEstimate {
        value: 2.0 * worst,
        provenance: BProvenance::Sampled,
    })
}

/// Parameters of the cutting-surface run.
#[derive(Debug, Clone, Serialize)]
pub struct AlgoParams {
    /// Oracle gap η: incumbents satisfy the semi-infinite constraints up to η.
    pub eta: f64,
    /// Subgradient bound override; sampled when absent.
    pub b_override: Option<f64>,
    /// Termination threshold on σ; default 1e-6·(1+|U|).
    pub sigma_tol: Option<f64>,
    pub max_iter: usize,
    /// Uniform multi-start count of the separation ascent.
    pub multi_start: usize,
    /// Ascent iteration cap per start.
    pub ascent_cap: usize,
    /// Dense-grid fallback resolution (points per dimension, m ≤ 3 only).
    pub grid_points_per_dim: usize,
    pub seed: u64,
}

impl Default for AlgoParams {
    fn default() -> Self {
        AlgoParams {
            eta: 1e-4,
            b_override: None,
            sigma_tol: None,
            max_iter: 500,
            multi_start: 16,
            ascent_cap: 200,
            grid_points_per_dim: 101,
            seed: 0,
        }
    }
}

/// Master-problem iterate y = (x, t, λ, s).
#[derive(Debug, Clone, Serialize)]
pub struct CuttingIterate {
    pub x: Vec<f64>,
    pub t: f64,
    pub lambda: f64,
    pub s: Vec<f64>,
}

/// Algorithm state: iteration counter, bound, cut sets, incumbent.
#[derive(Debug, Clone)]
pub struct CuttingState {
    pub k: usize,
    pub upper_bound: f64,
    /// Cut points per sample; never shrinks.
    pub cuts: Vec<Vec<Vec<f64>>>,
    pub incumbent: Option<CuttingIterate>,
    pub sigma: f64,
}

/// One trace row per master iteration.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub upper_bound: f64,
    pub sigma: f64,
    pub total_cuts: usize,
    pub wall_secs: f64,
}

/// `F(x,ξ) + t − λ d^p(ξ,ξ̂)` at an iterate (the slack before subtracting s).
fn penalized_value(
    f: &PiecewiseBilinearConstraint,
    y: &CuttingIterate,
    xi: &[f64],
    xi_hat: &[f64],
    p: WassersteinOrder,
) -> f64 {
    f.evaluate(&y.x, xi) + y.t - y.lambda * p.ground_cost(xi, xi_hat)
}

/// Solves the master LP: maximize σ subject to the objective-improvement row,
/// the CVaR row, every accumulated cut, and the iterate box.
#[allow(clippy::too_many_arguments)]
pub fn solve_master(
    state: &CuttingState,
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    c: &[f64],
    x_set: &PolytopeX,
    bounds: &Bounds,
    b: f64,
    alpha: f64,
    theta: f64,
    p: WassersteinOrder,
    tol: &Tolerances,
) -> Result<(CuttingIterate, f64), CuttingError> {
    let n = x_set.dim();
    let big_n = samples.len();
    let t_idx = n;
    let lambda_idx = n + 1;
    let s_base = n + 2;
    let sigma_idx = s_base + big_n;
    let total = sigma_idx + 1;
    let mut prog = ConicProgram::new(total);
    let mut obj = vec![0.0; total];
    obj[sigma_idx] = -1.0; // maximize σ
    prog.set_objective(obj);
    x_set.install(&mut prog, 0);
    prog.set_bounds(t_idx, 0.0, bounds.t_max);
    prog.set_bounds(lambda_idx, 0.0, bounds.lambda_max);
    for i in 0..big_n {
        prog.set_bounds(s_base + i, 0.0, bounds.s_max);
    }
    // c·x + σ ≤ M
    let mut row = vec![0.0; total];
    row[..n].copy_from_slice(c);
    row[sigma_idx] = 1.0;
    prog.add_ineq(row, state.upper_bound);
    // λθ^p + (1/N)Σ s_i ≤ tα
    let mut row = vec![0.0; total];
    row[lambda_idx] = theta.powf(p.exponent());
    row[t_idx] = -alpha;
    for i in 0..big_n {
        row[s_base + i] = 1.0 / big_n as f64;
    }
    prog.add_ineq(row, 0.0);
    // cuts: H_i(y, ξ) + σB ≤ 0
    let piece = &f.pieces()[0];
    for (i, q_i) in state.cuts.iter().enumerate() {
        let xi_hat = samples.sample(i);
        for xi in q_i {
            let mut row = vec![0.0; total];
            for (ii, crow) in piece.coupling.iter().enumerate() {
                row[ii] = dot(crow, xi) + piece.d[ii];
            }
            row[t_idx] = 1.0;
            row[lambda_idx] = -p.ground_cost(xi, xi_hat);
            row[s_base + i] = -1.0;
            row[sigma_idx] = b;
            prog.add_ineq(row, -(dot(&piece.a, xi) + piece.e));
        }
    }
    let res = conic::solve(&prog, tol).map_err(|e| CuttingError::Solver(e.to_string()))?;
    match res.status {
        SolveStatus::Optimal => Ok((
            CuttingIterate {
                x: res.x[..n].to_vec(),
                t: res.x[t_idx],
                lambda: res.x[lambda_idx],
                s: (0..big_n).map(|i| res.x[s_base + i]).collect(),
            },
            res.x[sigma_idx],
        )),
        SolveStatus::Infeasible => Err(CuttingError::MasterInfeasible(state.k)),
        s => Err(CuttingError::Solver(format!("master ended with {s:?}"))),
    }
}

/// Separation outcome for one sample.
#[derive(Debug, Clone)]
pub enum SeparationOutcome {
    /// A realization with H_i > 0 was found.
    Violation { xi: Vec<f64>, value: f64 },
    /// No violation found; `bound` is a certified upper bound on sup H_i when
    /// `certified` is set, otherwise only the best ascent value is known.
    Clean {
        best: Vec<f64>,
        best_value: f64,
        bound: f64,
        certified: bool,
    },
}

/// Shrinks the supergradient at the distance kink toward its minimum-norm
/// element so the concavity bound stays valid at ξ = ξ̂.
fn kink_supergradient(g: &[f64], lambda: f64) -> Vec<f64> {
    let norm = dot(g, g).sqrt();
    if norm <= lambda || norm < 1e-14 {
        return vec![0.0; g.len()];
    }
    g.iter().map(|v| v * (1.0 - lambda / norm)).collect()
}

/// Maximizes H_i(y,·) over Ξ by multi-start projected supergradient ascent.
///
/// Contract: whenever `sup_{ξ∈Ξ} H_i(y,ξ) > η`, a point with `H_i > 0` is
/// returned. No-violation results carry a concavity gap bound
/// `sup H ≤ H(ξ*) + max_{ξ∈Ξ} g(ξ*)·(ξ−ξ*)` (one LP over Ξ), strengthened by
/// a dense grid for m ≤ 3; when neither certifies the η gap the outcome is
/// flagged uncertified.
#[allow(clippy::too_many_arguments)]
pub fn separation_oracle(
    y: &CuttingIterate,
    i: usize,
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    support: &PolyhedralSupport,
    p: WassersteinOrder,
    eta: f64,
    params: &AlgoParams,
    rng: &mut ChaCha8Rng,
) -> Result<SeparationOutcome, CuttingError> {
    let xi_hat = samples.sample(i);
    let ranges = support
        .coord_ranges()
        .ok_or(CuttingError::SupportNotCompact)?
        .to_vec();
    let m = support.dim();
    let diam: f64 = ranges
        .iter()
        .map(|&(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt()
        .max(1e-9);
    let h = |xi: &[f64]| -> f64 {
        f.evaluate(&y.x, xi) + y.t - y.lambda * p.ground_cost(xi, xi_hat) - y.s[i]
    };
    let grad_h = |xi: &[f64]| -> Vec<f64> {
        let mut g = f.xi_subgradient(&y.x, xi);
        let diff: Vec<f64> = xi.iter().zip(xi_hat).map(|(a, b)| a - b).collect();
        let dist = dot(&diff, &diff).sqrt();
        match p {
            WassersteinOrder::One => {
                if dist > 1e-14 {
                    for (gv, dv) in g.iter_mut().zip(&diff) {
                        *gv -= y.lambda * dv / dist;
                    }
                }
                // at the kink the zero radial term is a valid supergradient
            }
            WassersteinOrder::Two => {
                for (gv, dv) in g.iter_mut().zip(&diff) {
                    *gv -= 2.0 * y.lambda * dv;
                }
            }
        }
        g
    };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(params.multi_start + 2);
    starts.push(support.project(xi_hat)?);
    starts.push(support.feasible_point().to_vec());
    for _ in 0..params.multi_start {
        let pt: Vec<f64> = ranges
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
            .collect();
        starts.push(support.project(&pt)?);
    }

    let mut best = starts[0].clone();
    let mut best_value = h(&best);
    for start in starts {
        let mut xi = start;
        let mut value = h(&xi);
        let mut step = diam / 4.0;
        for _ in 0..params.ascent_cap {
            let g = grad_h(&xi);
            let gnorm = dot(&g, &g).sqrt();
            if gnorm < 1e-12 || step < 1e-14 {
                break;
            }
            let candidate: Vec<f64> = xi
                .iter()
                .zip(&g)
                .map(|(v, gv)| v + step * gv / gnorm)
                .collect();
            let candidate = support.project(&candidate)?;
            let cand_value = h(&candidate);
            if cand_value > value + 1e-15 {
                xi = candidate;
                value = cand_value;
            } else {
                step *= 0.5;
            }
        }
        if value > best_value {
            best_value = value;
            best = xi;
        }
    }

    if best_value > 0.0 {
        return Ok(SeparationOutcome::Violation {
            xi: best,
            value: best_value,
        });
    }

    // concavity gap: sup H ≤ H(ξ*) + max_{ξ∈Ξ} g·(ξ − ξ*)
    let at_kink = best
        .iter()
        .zip(xi_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        < 1e-9;
    let g_cert = if at_kink && p == WassersteinOrder::One {
        kink_supergradient(&f.xi_subgradient(&y.x, &best), y.lambda)
    } else {
        grad_h(&best)
    };
    let mut bound = best_value + support.linear_max(&g_cert)? - dot(&g_cert, &best);
    let mut certified = bound <= eta;
    if !certified && m <= 3 {
        // dense grid plus a Lipschitz-in-ξ slack certifies the gap
        let per_dim = params.grid_points_per_dim.max(11);
        let mut grid_max = f64::NEG_INFINITY;
        for pt in GridIter::new(&ranges, per_dim) {
            if support.contains(&pt, 1e-9) {
                grid_max = grid_max.max(h(&pt));
            }
        }
        let res = GridIter::resolution(&ranges, per_dim);
        let lip_h = f.lipschitz_xi_at(&y.x)
            + y.lambda
                * match p {
                    WassersteinOrder::One => 1.0,
                    WassersteinOrder::Two => 2.0 * diam,
                };
        let grid_bound = grid_max + lip_h * res * (m as f64).sqrt();
        if grid_max > 0.0 {
            // the grid found an actual violation the ascent missed
            let pt = GridIter::new(&ranges, per_dim)
                .filter(|pt| support.contains(pt, 1e-9))
                .max_by(|a, b| h(a).partial_cmp(&h(b)).unwrap())
                .unwrap();
            let value = h(&pt);
            return Ok(SeparationOutcome::Violation { xi: pt, value });
        }
        bound = bound.min(grid_bound);
        certified = bound <= eta;
    }
    Ok(SeparationOutcome::Clean {
        best,
        best_value,
        bound,
        certified,
    })
}

/// Full outcome of a cutting-surface run.
#[derive(Debug, Clone)]
pub struct CuttingOutcome {
    pub solution: DrccpSolution,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// Some incumbent acceptance relied on an uncertified clean separation.
    pub weak_certificate: bool,
    pub bounds: Bounds,
    pub b: BEstimate,
    pub iterations: usize,
}

/// Runs the central cutting-surface algorithm.
///
/// Initialization sets the bound to U = max_X c·x with empty cut sets; each
/// iteration solves the master, terminates when the centering improvement σ
/// falls below the threshold (returning the previous incumbent), and
/// otherwise either adds violated cuts or accepts the iterate as the new
/// incumbent and tightens the bound to its objective.
#[allow(clippy::too_many_arguments)]
pub fn run_cutting_surface(
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    p: WassersteinOrder,
    alpha: f64,
    c: &[f64],
    x_set: &PolytopeX,
    support: &PolyhedralSupport,
    params: &AlgoParams,
    tol: &Tolerances,
) -> Result<CuttingOutcome, CuttingError> {
    if !f.concave_in_xi() {
        return Err(CuttingError::RequiresConcave);
    }
    if samples.dim() != f.xi_dim() || x_set.dim() != f.x_dim() || c.len() != f.x_dim() {
        return Err(CuttingError::Invalid("dimension mismatch".into()));
    }
    let bounds = compute_bounds(f, x_set, support, alpha, theta, p, samples.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let b = match params.b_override {
        Some(v) if v > 0.0 => BEstimate {
            value: v,
            provenance: BProvenance::Override,
        },
        Some(v) => {
            return Err(CuttingError::Invalid(format!(
                "subgradient bound override must be positive, got {v}"
            )))
        }
        None => estimate_b(f, &bounds, x_set, support, samples, p, 10_000, &mut rng)?,
    };

    // U = max over X of c·x
    let mut prog = ConicProgram::new(x_set.dim());
    prog.set_objective(c.iter().map(|v| -v).collect());
    x_set.install(&mut prog, 0);
    let res = conic::solve(&prog, tol).map_err(|e| CuttingError::Solver(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(CuttingError::Solver(format!(
            "objective upper bound solve: {:?}",
            res.status
        )));
    }
    let u = -res.objective;
    if let Some(v) = params.sigma_tol {
        if !(v > 0.0) {
            return Err(CuttingError::Invalid(format!(
                "sigma_tol must be positive, got {v}"
            )));
        }
    }
    let sigma_tol = params.sigma_tol.unwrap_or(1e-6 * (1.0 + u.abs()));

    let mut state = CuttingState {
        k: 0,
        upper_bound: u,
        cuts: vec![Vec::new(); samples.len()],
        incumbent: None,
        sigma: f64::INFINITY,
    };
    let mut trace = Vec::new();
    let mut weak = false;
    let started = std::time::Instant::now();
    let mut converged = false;

    for k in 1..=params.max_iter {
        state.k = k;
        let (y, sigma) = solve_master(
            &state, f, samples, c, x_set, &bounds, b.value, alpha, theta, p, tol,
        )?;
        state.sigma = sigma;
        trace.push(TraceRow {
            k,
            upper_bound: state.upper_bound,
            sigma,
            total_cuts: state.cuts.iter().map(Vec::len).sum(),
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if sigma <= sigma_tol {
            converged = true;
            break;
        }
        let mut any_violation = false;
        for i in 0..samples.len() {
            match separation_oracle(&y, i, f, samples, support, p, params.eta, params, &mut rng)? {
                SeparationOutcome::Violation { xi, value } => {
                    debug_assert!(value > 0.0, "cut is not a separator");
                    let duplicate = state.cuts[i].iter().any(|q| {
                        q.iter()
                            .zip(&xi)
                            .all(|(a, b)| (a - b).abs() <= 1e-9)
                    });
                    if !duplicate {
                        state.cuts[i].push(xi);
                    }
                    any_violation = true;
                }
                SeparationOutcome::Clean { certified, .. } => {
                    if !certified {
                        weak = true;
                    }
                }
            }
        }
        if !any_violation {
            state.upper_bound = dot(c, &y.x);
            state.incumbent = Some(y);
        }
    }

    let incumbent = state.incumbent.ok_or(CuttingError::NoIncumbent)?;
    let objective = dot(c, &incumbent.x);
    Ok(CuttingOutcome {
        solution: DrccpSolution {
            x: incumbent.x.clone(),
            t: incumbent.t,
            lambda: incumbent.lambda,
            s: incumbent.s.clone(),
            objective,
            method: MethodTag::Cutting,
            eta: None,
            lambda_zero: incumbent.lambda.abs() < 1e-9,
            unbounded_support_warning: false,
        },
        trace,
        converged,
        weak_certificate: weak,
        bounds,
        b,
        iterations: state.k,
    })
}

/// Post-hoc η-feasibility check of an iterate by dense grid (m ≤ 3):
/// `s_i + η ≥ sup_ξ [F + t − λ d^p]` for every sample.
pub fn verify_eta_feasible(
    y: &CuttingIterate,
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    support: &PolyhedralSupport,
    p: WassersteinOrder,
    eta: f64,
    points_per_dim: usize,
) -> Result<bool, CuttingError> {
    let ranges = support
        .coord_ranges()
        .ok_or(CuttingError::SupportNotCompact)?
        .to_vec();
    if ranges.len() > 3 {
        return Err(CuttingError::Invalid(
            "grid verification is limited to m <= 3".into(),
        ));
    }
    for i in 0..samples.len() {
        let mut sup = f64::NEG_INFINITY;
        for pt in GridIter::new(&ranges, points_per_dim) {
            if support.contains(&pt, 1e-9) {
                sup = sup.max(penalized_value(f, y, &pt, samples.sample(i), p));
            }
        }
        if sup > y.s[i] + eta {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (
        PiecewiseBilinearConstraint,
        SampleSet,
        PolytopeX,
        PolyhedralSupport,
    ) {
        let f = PiecewiseBilinearConstraint::single(vec![1.0], vec![vec![0.0]], vec![-1.0], 0.0)
            .unwrap();
        let samples = SampleSet::from_scalars(&[0.0, 1.0]).unwrap();
        let x_set = PolytopeX::from_box(vec![(0.0, 2.0)]).unwrap();
        let support = PolyhedralSupport::box_support(vec![(-1.0, 3.0)]).unwrap();
        (f, samples, x_set, support)
    }

    #[test]
    fn bounds_on_toy() {
        let (f, samples, x_set, support) = toy();
        let b = compute_bounds(
            &f,
            &x_set,
            &support,
            0.5,
            0.1,
            WassersteinOrder::One,
            samples.len(),
        )
        .unwrap();
        assert!((b.sup_neg_f - 3.0).abs() < 1e-9);
        assert!((b.t_max - 6.0).abs() < 1e-9);
        assert!((b.lambda_max - 30.0).abs() < 1e-7);
        assert!((b.s_max - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_reject_alpha_near_one() {
        let (f, samples, x_set, support) = toy();
        let res = compute_bounds(
            &f,
            &x_set,
            &support,
            1.0 - 1e-12,
            0.1,
            WassersteinOrder::One,
            samples.len(),
        );
        assert!(res.is_err());
    }

    #[test]
    fn bounds_constant_constraint() {
        // F == -1: sup(-F) = 1, t^M = 1/(1-alpha)
        let f = PiecewiseBilinearConstraint::single(vec![0.0], vec![vec![0.0]], vec![0.0], -1.0)
            .unwrap();
        let x_set = PolytopeX::from_box(vec![(0.0, 2.0)]).unwrap();
        let support = PolyhedralSupport::box_support(vec![(-1.0, 3.0)]).unwrap();
        let b = compute_bounds(&f, &x_set, &support, 0.5, 0.1, WassersteinOrder::One, 2).unwrap();
        assert!((b.t_max - 2.0).abs() < 1e-9);
    }

    #[test]
    fn b_estimate_dominates_analytic_bound() {
        let (f, samples, x_set, support) = toy();
        let bounds = compute_bounds(
            &f,
            &x_set,
            &support,
            0.5,
            0.1,
            WassersteinOrder::One,
            samples.len(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = estimate_b(
            &f,
            &bounds,
            &x_set,
            &support,
            &samples,
            WassersteinOrder::One,
            10_000,
            &mut rng,
        )
        .unwrap();
        // analytic sup of the subgradient norm:
        // sqrt(1 + 1 + (d max)^2 + 1 + (1 + λ^M)^2) with d max = 4, λ^M = 30
        let analytic = (1.0f64 + 1.0 + 16.0 + 1.0 + 31.0f64.powi(2)).sqrt();
        assert!(b.value >= analytic, "B = {} < analytic {analytic}", b.value);
        assert_eq!(b.provenance, BProvenance::Sampled);
    }

    #[test]
    fn b_override_recorded() {
        let (f, samples, x_set, support) = toy();
        let params = AlgoParams {
            b_override: Some(10.0),
            max_iter: 50,
            ..AlgoParams::default()
        };
        let out = run_cutting_surface(
            &f,
            &samples,
            0.1,
            WassersteinOrder::One,
            0.5,
            &[1.0],
            &x_set,
            &support,
            &params,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(out.b.value, 10.0);
        assert_eq!(out.b.provenance, BProvenance::Override);
    }

    #[test]
    fn master_with_tight_bound_and_no_cuts_gives_zero_sigma() {
        let (f, samples, x_set, support) = toy();
        let bounds = compute_bounds(
            &f,
            &x_set,
            &support,
            0.5,
            0.1,
            WassersteinOrder::One,
            samples.len(),
        )
        .unwrap();
        let state = CuttingState {
            k: 1,
            upper_bound: 0.0, // equals min over X of c·x
            cuts: vec![Vec::new(); samples.len()],
            incumbent: None,
            sigma: f64::INFINITY,
        };
        let (_, sigma) = solve_master(
            &state,
            &f,
            &samples,
            &[1.0],
            &x_set,
            &bounds,
            60.0,
            0.5,
            0.1,
            WassersteinOrder::One,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(sigma.abs() < 1e-9, "sigma = {sigma}");
    }

    #[test]
    fn first_master_measures_objective_range() {
        let (f, samples, x_set, support) = toy();
        let bounds = compute_bounds(
            &f,
            &x_set,
            &support,
            0.5,
            0.1,
            WassersteinOrder::One,
            samples.len(),
        )
        .unwrap();
        let state = CuttingState {
            k: 1,
            upper_bound: 2.0,
            cuts: vec![Vec::new(); samples.len()],
            incumbent: None,
            sigma: f64::INFINITY,
        };
        let (_, sigma) = solve_master(
            &state,
            &f,
            &samples,
            &[1.0],
            &x_set,
            &bounds,
            60.0,
            0.5,
            0.1,
            WassersteinOrder::One,
            &Tolerances::default(),
        )
        .unwrap();
        assert!((sigma - 2.0).abs() < 1e-7, "sigma = {sigma}");
    }

    #[test]
    fn separation_finds_violation_on_toy() {
        let (f, samples, _, support) = toy();
        let y = CuttingIterate {
            x: vec![0.5],
            t: 0.0,
            lambda: 0.1,
            s: vec![0.0, 0.0],
        };
        let params = AlgoParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // H_2(ξ) = ξ − 0.5 − 0.1|ξ − 1|, maximum at ξ = 3 with value 2.3
        match separation_oracle(
            &y,
            1,
            &f,
            &samples,
            &support,
            WassersteinOrder::One,
            1e-4,
            &params,
            &mut rng,
        )
        .unwrap()
        {
            SeparationOutcome::Violation { xi, value } => {
                assert!((xi[0] - 3.0).abs() < 1e-6, "xi = {}", xi[0]);
                assert!((value - 2.3).abs() < 1e-6, "value = {value}");
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn separation_certifies_clean() {
        let (f, samples, _, _) = toy();
        let support = PolyhedralSupport::box_support(vec![(-1.0, 1.0)]).unwrap();
        let y = CuttingIterate {
            x: vec![2.0],
            t: 0.0,
            lambda: 0.0,
            s: vec![0.0, 0.0],
        };
        let params = AlgoParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        match separation_oracle(
            &y,
            0,
            &f,
            &samples,
            &support,
            WassersteinOrder::One,
            1e-4,
            &params,
            &mut rng,
        )
        .unwrap()
        {
            SeparationOutcome::Clean {
                best_value,
                certified,
                bound,
                ..
            } => {
                assert!(best_value <= 0.0);
                assert!(certified, "bound {bound} not certified");
            }
            other => panic!("expected clean, got {other:?}"),
        }
    }

    #[test]
    fn separation_large_lambda_maximizer_at_sample() {
        let (f, samples, _, support) = toy();
        let y = CuttingIterate {
            x: vec![0.0],
            t: 0.0,
            lambda: 30.0,
            s: vec![0.0, 0.0],
        };
        let params = AlgoParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // with λ >> L the penalty dominates and the max sits at the sample:
        // H_2(ξ̂_2) = F(0, 1) = 1 > 0
        match separation_oracle(
            &y,
            1,
            &f,
            &samples,
            &support,
            WassersteinOrder::One,
            1e-4,
            &params,
            &mut rng,
        )
        .unwrap()
        {
            SeparationOutcome::Violation { xi, value } => {
                assert!((xi[0] - 1.0).abs() < 1e-6, "xi = {}", xi[0]);
                assert!((value - 1.0).abs() < 1e-6);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn robustly_feasible_instance_terminates_at_min() {
        // F == x - 10 <= -8 on X = [0,2]: never violated, optimum min c x
        let f = PiecewiseBilinearConstraint::single(vec![0.0], vec![vec![0.0]], vec![1.0], -10.0)
            .unwrap();
        let samples = SampleSet::from_scalars(&[0.0, 1.0]).unwrap();
        let x_set = PolytopeX::from_box(vec![(0.0, 2.0)]).unwrap();
        let support = PolyhedralSupport::box_support(vec![(-1.0, 3.0)]).unwrap();
        let out = run_cutting_surface(
            &f,
            &samples,
            0.1,
            WassersteinOrder::One,
            0.5,
            &[1.0],
            &x_set,
            &support,
            &AlgoParams::default(),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!(out.solution.objective.abs() < 1e-5, "{}", out.solution.objective);
    }

    #[test]
    fn toy_run_matches_conic_on_compact_support() {
        let (f, samples, x_set, support) = toy();
        let tol = Tolerances::default();
        // θ = 0.1 gives λ^M = 30 and so a large subgradient bound; the
        // centering rate degrades with B (final gap ~ B·σ_tol), hence the
        // tighter termination and the larger iteration budget
        let params = AlgoParams {
            max_iter: 2000,
            sigma_tol: Some(3e-7),
            ..AlgoParams::default()
        };
        let out = run_cutting_surface(
            &f,
            &samples,
            0.1,
            WassersteinOrder::One,
            0.5,
            &[1.0],
            &x_set,
            &support,
            &params,
            &tol,
        )
        .unwrap();
        assert!(out.converged, "did not converge in {} iterations", out.iterations);
        let conic_sol = crate::reformulate::solve_cvar_drccp(
            &f,
            &samples,
            0.1,
            0.5,
            &support,
            &[1.0],
            &x_set,
            WassersteinOrder::One,
            &tol,
        )
        .unwrap();
        assert!(
            (out.solution.objective - conic_sol.objective).abs() < 1e-4 + 1e-5,
            "cutting {} vs conic {}",
            out.solution.objective,
            conic_sol.objective
        );
        // monotone bound and nonnegative centering improvements
        for w in out.trace.windows(2) {
            assert!(w[1].upper_bound <= w[0].upper_bound + 1e-12);
        }
        assert!(out.trace.iter().all(|r| r.sigma >= -1e-9));
        // bound never dips below the true optimum (up to oracle slack)
        assert!(out.solution.objective >= conic_sol.objective - 1e-6);
        // hard master row holds at the incumbent, and it sits in the box
        let sol = &out.solution;
        let mean_s = sol.s.iter().sum::<f64>() / sol.s.len() as f64;
        assert!(sol.lambda * 0.1 + mean_s <= sol.t * 0.5 + 1e-9);
        assert!(sol.t >= -1e-12 && sol.t <= out.bounds.t_max + 1e-9);
        assert!(sol.lambda >= -1e-12 && sol.lambda <= out.bounds.lambda_max + 1e-9);
        assert!(sol.s.iter().all(|&v| v >= -1e-9 && v <= out.bounds.s_max + 1e-9));
        // final incumbent is η-feasible by the grid check
        let y = CuttingIterate {
            x: out.solution.x.clone(),
            t: out.solution.t,
            lambda: out.solution.lambda,
            s: out.solution.s.clone(),
        };
        assert!(verify_eta_feasible(
            &y,
            &f,
            &samples,
            &support,
            WassersteinOrder::One,
            1e-4 + 1e-7,
            2001
        )
        .unwrap());
    }

    #[test]
    fn theta_zero_matches_empirical_cvar_solution() {
        let (f, samples, x_set, support) = toy();
        let out = run_cutting_surface(
            &f,
            &samples,
            0.0,
            WassersteinOrder::One,
            0.5,
            &[1.0],
            &x_set,
            &support,
            &AlgoParams::default(),
            &Tolerances::default(),
        )
        .unwrap();
        // empirical CVaR optimum on the toy instance is x = 1
        assert!(
            (out.solution.objective - 1.0).abs() < 2e-4,
            "{}",
            out.solution.objective
        );
    }
}
