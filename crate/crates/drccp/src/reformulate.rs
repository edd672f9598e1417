//! Conic builders and solvers for the worst-case CVaR approximation, its
//! Lipschitz inner approximation, and the scenario / sample-approximation
//! baselines, plus feasibility-set comparison reports.

use crate::conic::{self, ConicProgram, SolveStatus};
use crate::constraints::{
    ConstraintError, ConstraintFunction, GridConfig, GridIter, PiecewiseBilinearConstraint,
    PolyhedralSupport, PolytopeX,
};
use crate::exact::{self, ExactError};
use crate::prob::{empirical_cvar, ProbError, SampleSet, Tolerances, WassersteinOrder};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReformulateError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("only the 1-Wasserstein metric is supported on this path")]
    RequiresOrderOne,
    #[error("solve ended with status {0:?}")]
    Solve(SolveStatus),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("conic layer: {0}")]
    Conic(String),
}

/// Which solver produced a [`DrccpSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    CvarConic,
    InnerCdcp,
    Cutting,
    Scenario,
}

/// Solution of one of the solvers.
///
/// Field use varies by method: the CVaR paths fill `t`, `lambda` (dual
/// multiplier, or the Lipschitz cone value on the inner path) and the
/// per-sample epigraph values `s`; the scenario program fills only `x` and
/// `objective`.
#[derive(Debug, Clone, Serialize)]
pub struct DrccpSolution {
    pub x: Vec<f64>,
    pub t: f64,
    pub lambda: f64,
    pub s: Vec<f64>,
    pub objective: f64,
    pub method: MethodTag,
    /// Dual multipliers η_ik of the support rows (polytope-support CVaR path).
    pub eta: Option<Vec<Vec<Vec<f64>>>>,
    /// Set when the CVaR multiplier came out (numerically) zero.
    pub lambda_zero: bool,
    /// Set when the support is unbounded and the certificate leans on the
    /// growth condition rather than boundedness.
    pub unbounded_support_warning: bool,
}

/// Variable layout of the CVaR reformulation program.
#[derive(Debug, Clone)]
pub struct CvarVarMap {
    pub n: usize,
    pub num_samples: usize,
    pub num_pieces: usize,
    pub t: usize,
    pub lambda: usize,
    pub s_base: usize,
    /// Base index of η_ik (polytope support), with `eta_len` rows per (i,k).
    pub eta_base: Option<usize>,
    pub eta_len: usize,
}

impl CvarVarMap {
    pub fn eta_index(&self, i: usize, k: usize) -> Option<usize> {
        self.eta_base
            .map(|b| b + (i * self.num_pieces + k) * self.eta_len)
    }
}

fn validate_common(
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    c: &[f64],
    x_set: &PolytopeX,
) -> Result<(), ReformulateError> {
    if samples.dim() != f.xi_dim() {
        return Err(ReformulateError::Invalid(
            "sample dimension vs constraint".into(),
        ));
    }
    if x_set.dim() != f.x_dim() || c.len() != f.x_dim() {
        return Err(ReformulateError::Invalid(
            "decision dimension vs constraint/objective".into(),
        ));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(ReformulateError::Invalid(format!("theta = {theta}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ReformulateError::Invalid(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Builds the conic reformulation of the worst-case CVaR feasibility program
///
/// ```text
/// min c·x  s.t.  λθ + (1/N) Σ s_i ≤ tα,
///                s_i ≥ b_k(x) + t + (a_k + A_kᵀx − Cᵀη_ik)·ξ̂_i + η_ik·h,
///                ‖a_k + A_kᵀx − Cᵀη_ik‖ ≤ λ,   η_ik ≥ 0,  s_i ≥ 0,
/// ```
///
/// with the η blocks dropped on a free support. 1-Wasserstein only.
pub fn build_cvar_drccp(
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    support: &PolyhedralSupport,
    c: &[f64],
    x_set: &PolytopeX,
    p: WassersteinOrder,
) -> Result<(ConicProgram, CvarVarMap), ReformulateError> {
    if p != WassersteinOrder::One {
        return Err(ReformulateError::RequiresOrderOne);
    }
    validate_common(f, samples, theta, alpha, c, x_set)?;
    if support.dim() != f.xi_dim() {
        return Err(ReformulateError::Invalid("support dimension".into()));
    }
    let n = f.x_dim();
    let m = f.xi_dim();
    let big_n = samples.len();
    let big_k = f.num_pieces();
    let eta_len = if support.is_free() {
        0
    } else {
        support.rows().len()
    };
    let t_idx = n;
    let lambda_idx = n + 1;
    let s_base = n + 2;
    let eta_base = (!support.is_free()).then_some(s_base + big_n);
    let total = s_base + big_n + big_n * big_k * eta_len;

    let mut prog = ConicProgram::new(total);
    let mut obj = vec![0.0; total];
    obj[..n].copy_from_slice(c);
    prog.set_objective(obj);
    x_set.install(&mut prog, 0);
    prog.set_bounds(lambda_idx, 0.0, f64::INFINITY);
    for i in 0..big_n {
        prog.set_bounds(s_base + i, 0.0, f64::INFINITY);
    }
    if let Some(base) = eta_base {
        for idx in base..total {
            prog.set_bounds(idx, 0.0, f64::INFINITY);
        }
    }

    // λθ + (1/N) Σ s_i − tα ≤ 0
    let mut master = vec![0.0; total];
    master[lambda_idx] = theta;
    master[t_idx] = -alpha;
    for i in 0..big_n {
        master[s_base + i] = 1.0 / big_n as f64;
    }
    prog.add_ineq(master, 0.0);

    let var_map = CvarVarMap {
        n,
        num_samples: big_n,
        num_pieces: big_k,
        t: t_idx,
        lambda: lambda_idx,
        s_base,
        eta_base,
        eta_len,
    };

    for (i, xi_hat) in samples.samples().iter().enumerate() {
        for (k, piece) in f.pieces().iter().enumerate() {
            // x-coefficients of b_k(x) + (a_k + A_kᵀx)·ξ̂_i
            let xcoef: Vec<f64> = piece
                .coupling
                .iter()
                .zip(&piece.d)
                .map(|(row, &d)| conic::dot(row, xi_hat) + d)
                .collect();
            let constant = piece.e + conic::dot(&piece.a, xi_hat);
            let mut row = vec![0.0; total];
            row[..n].copy_from_slice(&xcoef);
            row[t_idx] = 1.0;
            row[s_base + i] = -1.0;
            if let Some(base) = var_map.eta_index(i, k) {
                for (r, (crow, h)) in support.rows().iter().enumerate() {
                    row[base + r] = h - conic::dot(crow, xi_hat);
                }
            }
            prog.add_ineq(row, -constant);

            // ‖a_k + A_kᵀx − Cᵀη_ik‖ ≤ λ, one block per (i,k)
            if let Some(base) = var_map.eta_index(i, k) {
                let mut m_rows = Vec::with_capacity(m);
                for j in 0..m {
                    let mut mrow = vec![0.0; total];
                    for (ii, crow) in piece.coupling.iter().enumerate() {
                        mrow[ii] = crow[j];
                    }
                    for (r, (crow, _)) in support.rows().iter().enumerate() {
                        mrow[base + r] = -crow[j];
                    }
                    m_rows.push(mrow);
                }
                let mut r = vec![0.0; total];
                r[lambda_idx] = 1.0;
                prog.add_soc(m_rows, piece.a.clone(), r, 0.0);
            }
        }
    }
    if support.is_free() {
        // without η the cone ‖a_k + A_kᵀx‖ ≤ λ is sample-independent
        for piece in f.pieces() {
            let mut m_rows = Vec::with_capacity(m);
            for j in 0..m {
                let mut mrow = vec![0.0; total];
                for (ii, crow) in piece.coupling.iter().enumerate() {
                    mrow[ii] = crow[j];
                }
                m_rows.push(mrow);
            }
            let mut r = vec![0.0; total];
            r[lambda_idx] = 1.0;
            prog.add_soc(m_rows, piece.a.clone(), r, 0.0);
        }
    }
    Ok((prog, var_map))
}

fn extract_cvar_solution(
    res: &conic::SolverResult,
    var_map: &CvarVarMap,
    method: MethodTag,
    support_warning: bool,
) -> DrccpSolution {
    let x = res.x[..var_map.n].to_vec();
    let s: Vec<f64> = (0..var_map.num_samples)
        .map(|i| res.x[var_map.s_base + i])
        .collect();
    let lambda = res.x[var_map.lambda];
    let eta = var_map.eta_base.map(|_| {
        (0..var_map.num_samples)
            .map(|i| {
                (0..var_map.num_pieces)
                    .map(|k| {
                        let base = var_map.eta_index(i, k).unwrap();
                        res.x[base..base + var_map.eta_len].to_vec()
                    })
                    .collect()
            })
            .collect()
    });
    DrccpSolution {
        x,
        t: res.x[var_map.t],
        lambda,
        s,
        objective: res.objective,
        method,
        eta,
        lambda_zero: lambda.abs() < 1e-9,
        unbounded_support_warning: support_warning,
    }
}

/// Builds and solves the CVaR reformulation.
pub fn solve_cvar_drccp(
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    support: &PolyhedralSupport,
    c: &[f64],
    x_set: &PolytopeX,
    p: WassersteinOrder,
    tol: &Tolerances,
) -> Result<DrccpSolution, ReformulateError> {
    let (prog, var_map) = build_cvar_drccp(f, samples, theta, alpha, support, c, x_set, p)?;
    let res = conic::solve(&prog, tol).map_err(|e| ReformulateError::Conic(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(ReformulateError::Solve(res.status));
    }
    Ok(extract_cvar_solution(
        &res,
        &var_map,
        MethodTag::CvarConic,
        !support.compact(),
    ))
}

/// Detailed outcome of the frozen-decision worst-case CVaR membership solve.
#[derive(Debug, Clone)]
pub struct CdcpMembership {
    pub member: bool,
    /// Optimal value of `λθ + (1/N)Σ s_i − tα`.
    pub value: f64,
    pub t: f64,
    pub lambda: f64,
    pub s: Vec<f64>,
}

/// Worst-case CVaR membership at a frozen decision: solves the small program
/// in (t, λ, s, η) minimizing `λθ + (1/N)Σ s_i − tα` and accepts when the
/// optimum is ≤ `feas_tol`. The optimal value is returned alongside.
pub fn membership_cdcp(
    x: &[f64],
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    support: &PolyhedralSupport,
    tol: &Tolerances,
) -> Result<(bool, f64), ReformulateError> {
    let d = membership_cdcp_detail(x, f, samples, theta, alpha, support, tol)?;
    Ok((d.member, d.value))
}

/// [`membership_cdcp`] with the minimizing (t, λ, s) exposed.
pub fn membership_cdcp_detail(
    x: &[f64],
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    support: &PolyhedralSupport,
    tol: &Tolerances,
) -> Result<CdcpMembership, ReformulateError> {
    if x.len() != f.x_dim() {
        return Err(ReformulateError::Invalid("decision dimension".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ReformulateError::Invalid(format!("alpha = {alpha}")));
    }
    let big_n = samples.len();
    let big_k = f.num_pieces();
    let m = f.xi_dim();
    let eta_len = if support.is_free() {
        0
    } else {
        support.rows().len()
    };
    // variables: t, λ, s_1..N, then η blocks
    let t_idx = 0;
    let lambda_idx = 1;
    let s_base = 2;
    let eta_base = s_base + big_n;
    let total = eta_base + big_n * big_k * eta_len;
    let mut prog = ConicProgram::new(total);
    let mut obj = vec![0.0; total];
    obj[t_idx] = -alpha;
    obj[lambda_idx] = theta;
    for i in 0..big_n {
        obj[s_base + i] = 1.0 / big_n as f64;
    }
    prog.set_objective(obj);
    prog.set_bounds(lambda_idx, 0.0, f64::INFINITY);
    for i in 0..big_n {
        prog.set_bounds(s_base + i, 0.0, f64::INFINITY);
    }
    for idx in eta_base..total {
        prog.set_bounds(idx, 0.0, f64::INFINITY);
    }
    let grads: Vec<Vec<f64>> = (0..big_k).map(|k| f.xi_gradient(k, x)).collect();
    for (i, xi_hat) in samples.samples().iter().enumerate() {
        for k in 0..big_k {
            let value = f.affine_part(k, x) + conic::dot(&grads[k], xi_hat);
            let mut row = vec![0.0; total];
            row[t_idx] = 1.0;
            row[s_base + i] = -1.0;
            if eta_len > 0 {
                let base = eta_base + (i * big_k + k) * eta_len;
                for (r, (crow, h)) in support.rows().iter().enumerate() {
                    row[base + r] = h - conic::dot(crow, xi_hat);
                }
            }
            prog.add_ineq(row, -value);
            if eta_len > 0 {
                let base = eta_base + (i * big_k + k) * eta_len;
                let mut m_rows = Vec::with_capacity(m);
                for jj in 0..m {
                    let mut mrow = vec![0.0; total];
                    for (r, (crow, _)) in support.rows().iter().enumerate() {
                        mrow[base + r] = -crow[jj];
                    }
                    m_rows.push(mrow);
                }
                let mut r = vec![0.0; total];
                r[lambda_idx] = 1.0;
                prog.add_soc(m_rows, grads[k].clone(), r, 0.0);
            }
        }
    }
    if support.is_free() {
        // cones reduce to a constant lower bound on λ
        let lip = grads
            .iter()
            .map(|g| conic::dot(g, g).sqrt())
            .fold(0.0, f64::max);
        prog.set_bounds(lambda_idx, lip, f64::INFINITY);
    }
    let res = conic::solve(&prog, tol).map_err(|e| ReformulateError::Conic(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(ReformulateError::Solve(res.status));
    }
    Ok(CdcpMembership {
        member: res.objective <= tol.feas_tol,
        value: res.objective,
        t: res.x[t_idx],
        lambda: res.x[lambda_idx],
        s: (0..big_n).map(|i| res.x[s_base + i]).collect(),
    })
}

/// Lipschitz inner-approximation membership:
/// `θ L_F + inf_t [(1/N) Σ (F(x,ξ̂_i)+t)₊ − tα] ≤ 0` by breakpoint
/// enumeration. Returns the verdict and the attained value.
pub fn membership_inner(
    x: &[f64],
    f: &ConstraintFunction,
    l_f: f64,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    tol: &Tolerances,
) -> Result<(bool, f64), ReformulateError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ReformulateError::Invalid(format!("alpha = {alpha}")));
    }
    if l_f <= 0.0 {
        return Err(ReformulateError::Invalid("Lipschitz bound must be positive".into()));
    }
    let values: Vec<f64> = samples.samples().iter().map(|s| f.eval(x, s)).collect();
    // inf_t [(1/N)Σ(v_i+t)+ − tα] = α · CVaR_{1−α}(v)
    let value = theta * l_f + alpha * empirical_cvar(&values, alpha)?;
    Ok((value <= tol.feas_tol, value))
}

/// Solves the inner-approximation program with the x-dependent Lipschitz
/// bound as a cone variable:
///
/// ```text
/// min c·x  s.t.  θℓ + (1/N) Σ u_i − tα ≤ 0,
///                u_i ≥ F_k(x,ξ̂_i) + t,  u_i ≥ 0,  ℓ ≥ ‖a_k + A_kᵀx‖.
/// ```
pub fn solve_inner_cdcp(
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    c: &[f64],
    x_set: &PolytopeX,
    tol: &Tolerances,
) -> Result<DrccpSolution, ReformulateError> {
    validate_common(f, samples, theta, alpha, c, x_set)?;
    let n = f.x_dim();
    let m = f.xi_dim();
    let big_n = samples.len();
    let t_idx = n;
    let ell_idx = n + 1;
    let u_base = n + 2;
    let total = u_base + big_n;
    let mut prog = ConicProgram::new(total);
    let mut obj = vec![0.0; total];
    obj[..n].copy_from_slice(c);
    prog.set_objective(obj);
    x_set.install(&mut prog, 0);
    prog.set_bounds(ell_idx, 0.0, f64::INFINITY);
    for i in 0..big_n {
        prog.set_bounds(u_base + i, 0.0, f64::INFINITY);
    }
    let mut master = vec![0.0; total];
    master[ell_idx] = theta;
    master[t_idx] = -alpha;
    for i in 0..big_n {
        master[u_base + i] = 1.0 / big_n as f64;
    }
    prog.add_ineq(master, 0.0);
    for (i, xi_hat) in samples.samples().iter().enumerate() {
        for piece in f.pieces() {
            let xcoef: Vec<f64> = piece
                .coupling
                .iter()
                .zip(&piece.d)
                .map(|(row, &d)| conic::dot(row, xi_hat) + d)
                .collect();
            let constant = piece.e + conic::dot(&piece.a, xi_hat);
            let mut row = vec![0.0; total];
            row[..n].copy_from_slice(&xcoef);
            row[t_idx] = 1.0;
            row[u_base + i] = -1.0;
            prog.add_ineq(row, -constant);
        }
    }
    for piece in f.pieces() {
        let mut m_rows = Vec::with_capacity(m);
        for j in 0..m {
            let mut mrow = vec![0.0; total];
            for (ii, crow) in piece.coupling.iter().enumerate() {
                mrow[ii] = crow[j];
            }
            m_rows.push(mrow);
        }
        let mut r = vec![0.0; total];
        r[ell_idx] = 1.0;
        prog.add_soc(m_rows, piece.a.clone(), r, 0.0);
    }
    let res = conic::solve(&prog, tol).map_err(|e| ReformulateError::Conic(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(ReformulateError::Solve(res.status));
    }
    Ok(DrccpSolution {
        x: res.x[..n].to_vec(),
        t: res.x[t_idx],
        lambda: res.x[ell_idx],
        s: (0..big_n).map(|i| res.x[u_base + i]).collect(),
        objective: res.objective,
        method: MethodTag::InnerCdcp,
        eta: None,
        lambda_zero: false,
        unbounded_support_warning: false,
    })
}

/// Robust scenario program: `min c·x` with `F(x,ξ̂_i) + δ ≤ 0` for every
/// sample (an LP for piecewise-bilinear constraints). δ = 0 is the classical
/// scenario program.
pub fn solve_scenario(
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    delta: f64,
    c: &[f64],
    x_set: &PolytopeX,
    tol: &Tolerances,
) -> Result<DrccpSolution, ReformulateError> {
    if !(delta >= 0.0) {
        return Err(ReformulateError::Invalid(format!("delta = {delta}")));
    }
    if samples.dim() != f.xi_dim() || x_set.dim() != f.x_dim() || c.len() != f.x_dim() {
        return Err(ReformulateError::Invalid("scenario dimensions".into()));
    }
    let n = f.x_dim();
    let mut prog = ConicProgram::new(n);
    prog.set_objective(c.to_vec());
    x_set.install(&mut prog, 0);
    for xi_hat in samples.samples() {
        for piece in f.pieces() {
            let xcoef: Vec<f64> = piece
                .coupling
                .iter()
                .zip(&piece.d)
                .map(|(row, &d)| conic::dot(row, xi_hat) + d)
                .collect();
            let constant = piece.e + conic::dot(&piece.a, xi_hat);
            prog.add_ineq(xcoef, -constant - delta);
        }
    }
    let res = conic::solve(&prog, tol).map_err(|e| ReformulateError::Conic(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(ReformulateError::Solve(res.status));
    }
    Ok(DrccpSolution {
        x: res.x.clone(),
        t: 0.0,
        lambda: 0.0,
        s: Vec::new(),
        objective: res.objective,
        method: MethodTag::Scenario,
        eta: None,
        lambda_zero: false,
        unbounded_support_warning: false,
    })
}

/// Sample-approximation membership: at most a δ fraction of samples violate.
/// Returns the verdict and the violated fraction.
pub fn membership_sample_approx(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    delta: f64,
) -> (bool, f64) {
    let violated = samples
        .samples()
        .iter()
        .filter(|s| f.eval(x, s) > 0.0)
        .count() as f64
        / samples.len() as f64;
    (violated <= delta, violated)
}

/// Scenario membership with margin δ: `F(x,ξ̂_i) + δ ≤ 0` for all samples.
/// Returns the verdict and `max_i F(x,ξ̂_i) + δ`.
pub fn membership_scenario(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    delta: f64,
) -> (bool, f64) {
    let worst = samples
        .samples()
        .iter()
        .map(|s| f.eval(x, s))
        .fold(f64::NEG_INFINITY, f64::max)
        + delta;
    (worst <= 0.0, worst)
}

/// Largest ambiguity radius for which a scenario-feasible point is guaranteed
/// to stay in the inner approximation.
#[derive(Debug, Clone, Serialize)]
pub struct ExPostThreshold {
    pub threshold: f64,
    /// Margin γ_x = min over inactive samples of −F(x,ξ̂_i); `None` when all
    /// samples are active.
    pub gamma: Option<f64>,
    /// Indices of samples active at x (|F| ≤ feas_tol).
    pub active: Vec<usize>,
    pub degenerate: bool,
}

/// Ex-post radius threshold `(γ_x / L_F) (α − |J_x|/N)` clamped at zero, for
/// a point x feasible in the δ = 0 scenario program.
pub fn ex_post_threshold(
    x: &[f64],
    f: &ConstraintFunction,
    samples: &SampleSet,
    alpha: f64,
    l_f: f64,
    tol: &Tolerances,
) -> Result<ExPostThreshold, ReformulateError> {
    if !(alpha > 0.0 && alpha < 1.0) || l_f <= 0.0 {
        return Err(ReformulateError::Invalid("alpha or Lipschitz bound".into()));
    }
    let values: Vec<f64> = samples.samples().iter().map(|s| f.eval(x, s)).collect();
    let worst = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst > tol.feas_tol {
        return Err(ReformulateError::Invalid(format!(
            "point is not scenario-feasible (max F = {worst:.3e})"
        )));
    }
    let active: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol.feas_tol)
        .map(|(i, _)| i)
        .collect();
    if active.len() == samples.len() {
        return Ok(ExPostThreshold {
            threshold: 0.0,
            gamma: None,
            active,
            degenerate: true,
        });
    }
    let gamma = values
        .iter()
        .enumerate()
        .filter(|(i, _)| !active.contains(i))
        .map(|(_, v)| -v)
        .fold(f64::INFINITY, f64::min);
    let threshold = ((gamma / l_f) * (alpha - active.len() as f64 / samples.len() as f64)).max(0.0);
    Ok(ExPostThreshold {
        threshold,
        gamma: Some(gamma),
        active,
        degenerate: false,
    })
}

/// How the sup of −F over X×Ξ was obtained.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "resolution")]
pub enum TStarMethod {
    VertexEnumeration,
    Grid(f64),
}

/// Estimates `t* = sup_{x∈X, ξ∈Ξ} −F(x,ξ)`.
///
/// For a single bilinear piece the sup is attained at a vertex pair, so
/// vertex enumeration is exact at desk scale. With several pieces (or when
/// enumeration is too large) a dense grid lower bound is used and combined
/// with the vertex value; the result is labelled accordingly.
pub fn estimate_t_star(
    f: &PiecewiseBilinearConstraint,
    x_set: &PolytopeX,
    support: &PolyhedralSupport,
    grid: &GridConfig,
) -> Result<(f64, TStarMethod), ReformulateError> {
    let neg_f = |x: &[f64], xi: &[f64]| -f.evaluate(x, xi);
    let vertex_value = match (x_set.vertices(), support.vertices()) {
        (Ok(xv), Ok(sv)) if !xv.is_empty() && !sv.is_empty() => {
            let mut best = f64::NEG_INFINITY;
            for x in &xv {
                for xi in &sv {
                    best = best.max(neg_f(x, xi));
                }
            }
            Some(best)
        }
        _ => None,
    };
    if f.num_pieces() == 1 {
        if let Some(v) = vertex_value {
            return Ok((v, TStarMethod::VertexEnumeration));
        }
    }
    // grid search over the product box
    let xr = x_set.require_bounded()?;
    let sr = support
        .coord_ranges()
        .ok_or_else(|| ReformulateError::Invalid("t* needs a compact support".into()))?;
    let per_dim = grid.points_per_dim.min(41).max(5);
    let dims = xr.len() + sr.len();
    let total = (per_dim as f64).powi(dims as i32);
    if total > 4e7 {
        return Err(ReformulateError::Invalid(format!(
            "t* grid of {total:.0} points is too large"
        )));
    }
    let mut ranges = xr.to_vec();
    ranges.extend_from_slice(sr);
    let mut best = vertex_value.unwrap_or(f64::NEG_INFINITY);
    for pt in GridIter::new(&ranges, per_dim) {
        let (x, xi) = pt.split_at(xr.len());
        best = best.max(neg_f(x, xi));
    }
    Ok((
        best,
        TStarMethod::Grid(GridIter::resolution(&ranges, per_dim)),
    ))
}

/// Per-candidate membership verdicts across the feasibility sets.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateVerdicts {
    pub x: Vec<f64>,
    pub in_domain: bool,
    pub scenario_delta2: bool,
    pub inner: bool,
    pub sample_approx_delta1: Option<bool>,
    pub cdcp: bool,
    pub dcp: bool,
    /// Ex-post radius threshold when the candidate is δ=0 scenario feasible.
    pub ex_post_threshold: Option<f64>,
}

/// Comparison report over candidate decisions: inclusion margins δ₁, δ₂ and
/// the verdicts, with a counter of inclusion-chain violations.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub delta1: f64,
    pub delta2: f64,
    pub t_star: f64,
    pub lipschitz: f64,
    pub candidates: Vec<CandidateVerdicts>,
    /// Violations of the chain scenario_δ₂ ⊆ inner ⊆ SA_δ₁ and
    /// inner ⊆ CDCP ⊆ DCP beyond tolerance; must be zero on valid data.
    pub inclusion_violations: usize,
    /// SA column dropped because δ₁ < 0 (radius too large for the bound).
    pub sample_approx_skipped: bool,
}

/// Evaluates every membership per candidate and checks the inclusion chain.
#[allow(clippy::too_many_arguments)]
pub fn compare_sets(
    candidates: &[Vec<f64>],
    f: &PiecewiseBilinearConstraint,
    samples: &SampleSet,
    theta: f64,
    alpha: f64,
    support: &PolyhedralSupport,
    x_set: &PolytopeX,
    l_f: f64,
    t_star: f64,
    tol: &Tolerances,
    grid: &GridConfig,
) -> Result<ComparisonReport, ReformulateError> {
    if l_f <= 0.0 || t_star <= 0.0 {
        return Err(ReformulateError::Invalid(
            "compare_sets needs positive L_F and t*".into(),
        ));
    }
    let delta1 = alpha - theta * l_f / t_star;
    let delta2 = theta * l_f / alpha;
    let sa_skipped = delta1 < 0.0;
    let cf = ConstraintFunction::Piecewise(f.clone());

    let rows: Result<Vec<(CandidateVerdicts, usize)>, ReformulateError> = candidates
        .par_iter()
        .map(|x| {
            let in_domain = x_set.contains(x, tol.feas_tol);
            if !in_domain {
                return Ok((
                    CandidateVerdicts {
                        x: x.clone(),
                        in_domain,
                        scenario_delta2: false,
                        inner: false,
                        sample_approx_delta1: None,
                        cdcp: false,
                        dcp: false,
                        ex_post_threshold: None,
                    },
                    0,
                ));
            }
            let (scp_member, scp_value) = membership_scenario(x, &cf, samples, delta2);
            let (inner_member, inner_value) =
                membership_inner(x, &cf, l_f, samples, theta, alpha, tol)?;
            let (sa_member, sa_fraction) = membership_sample_approx(x, &cf, samples, delta1.max(0.0));
            let (cdcp_member, cdcp_value) =
                membership_cdcp(x, f, samples, theta, alpha, support, tol)?;
            let (dcp_member, _) = exact::membership_dcp(
                x,
                &cf,
                samples,
                theta,
                WassersteinOrder::One,
                alpha,
                support,
                grid,
                tol,
            )?;
            let ex_post = {
                let (scp0, _) = membership_scenario(x, &cf, samples, 0.0);
                if scp0 {
                    ex_post_threshold(x, &cf, samples, alpha, l_f, tol)
                        .ok()
                        .map(|t| t.threshold)
                } else {
                    None
                }
            };
            let mut violations = 0;
            if scp_value <= -tol.feas_tol && inner_value > tol.feas_tol {
                violations += 1;
            }
            if !sa_skipped && inner_value <= -tol.feas_tol && sa_fraction > delta1 + 1e-12 {
                violations += 1;
            }
            if inner_value <= -tol.feas_tol && cdcp_value > tol.feas_tol {
                violations += 1;
            }
            if cdcp_value <= -tol.feas_tol && !dcp_member {
                violations += 1;
            }
            Ok((
                CandidateVerdicts {
                    x: x.clone(),
                    in_domain,
                    scenario_delta2: scp_member,
                    inner: inner_member,
                    sample_approx_delta1: (!sa_skipped).then_some(sa_member),
                    cdcp: cdcp_member,
                    dcp: dcp_member,
                    ex_post_threshold: ex_post,
                },
                violations,
            ))
        })
        .collect();
    let rows = rows?;
    let inclusion_violations = rows.iter().map(|(_, v)| v).sum();
    Ok(ComparisonReport {
        delta1,
        delta2,
        t_star,
        lipschitz: l_f,
        candidates: rows.into_iter().map(|(c, _)| c).collect(),
        inclusion_violations,
        sample_approx_skipped: sa_skipped,
    })
}
