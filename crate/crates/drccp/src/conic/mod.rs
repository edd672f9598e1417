//! Solver-agnostic conic programs: linear objective, linear equality and
//! inequality rows, second-order cone blocks, and variable bounds.
//!
//! Programs are built once and solved by one of two in-crate dense backends:
//! a two-phase simplex for pure LPs and a homogeneous self-dual interior-point
//! method when second-order cone blocks are present. Both backends verify the
//! returned point against the program before reporting `Optimal`.

mod ipm;
mod simplex;

pub mod export;

use crate::prob::Tolerances;
use serde::Serialize;
use thiserror::Error;

/// A second-order cone block `‖M x + q‖₂ ≤ rᵀx + s`.
#[derive(Debug, Clone)]
pub struct SocBlock {
    /// Rows of `M`, each of length `num_vars`.
    pub m_rows: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    /// Length `num_vars`.
    pub r: Vec<f64>,
    pub s: f64,
}

/// Minimization program over variables `x ∈ R^n`.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    eq_rows: Vec<(Vec<f64>, f64)>,
    ineq_rows: Vec<(Vec<f64>, f64)>,
    soc_blocks: Vec<SocBlock>,
    bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    Malformed(String),
}

impl ConicProgram {
    /// New program with `num_vars` free variables and zero objective.
    pub fn new(num_vars: usize) -> Self {
        ConicProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            soc_blocks: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Sets the (minimization) objective vector.
    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.num_vars, "objective length mismatch");
        self.objective = c;
    }

    pub fn set_objective_coeff(&mut self, j: usize, v: f64) {
        self.objective[j] = v;
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN bound");
        self.bounds[j] = (lo, hi);
    }

    /// Adds `row · x = rhs`.
    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.num_vars, "equality row length mismatch");
        self.eq_rows.push((row, rhs));
    }

    /// Adds `row · x ≤ rhs`.
    pub fn add_ineq(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.num_vars, "inequality row length mismatch");
        self.ineq_rows.push((row, rhs));
    }

    /// Adds `‖M x + q‖ ≤ rᵀx + s`.
    pub fn add_soc(&mut self, m_rows: Vec<Vec<f64>>, q: Vec<f64>, r: Vec<f64>, s: f64) {
        assert_eq!(m_rows.len(), q.len(), "soc block row count mismatch");
        for row in &m_rows {
            assert_eq!(row.len(), self.num_vars, "soc row length mismatch");
        }
        assert_eq!(r.len(), self.num_vars, "soc r length mismatch");
        self.soc_blocks.push(SocBlock { m_rows, q, r, s });
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn eq_rows(&self) -> &[(Vec<f64>, f64)] {
        &self.eq_rows
    }

    pub fn ineq_rows(&self) -> &[(Vec<f64>, f64)] {
        &self.ineq_rows
    }

    pub fn soc_blocks(&self) -> &[SocBlock] {
        &self.soc_blocks
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    fn validate(&self) -> Result<(), ConicError> {
        if self.num_vars == 0 {
            return Err(ConicError::Malformed("program has no variables".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !finite(&self.objective) {
            return Err(ConicError::Malformed("non-finite objective".into()));
        }
        for (row, rhs) in self.eq_rows.iter().chain(self.ineq_rows.iter()) {
            if !finite(row) || !rhs.is_finite() {
                return Err(ConicError::Malformed("non-finite row".into()));
            }
        }
        for blk in &self.soc_blocks {
            if blk.m_rows.iter().any(|r| !finite(r))
                || !finite(&blk.q)
                || !finite(&blk.r)
                || !blk.s.is_finite()
            {
                return Err(ConicError::Malformed("non-finite cone block".into()));
            }
        }
        for &(lo, hi) in &self.bounds {
            if lo > hi {
                return Err(ConicError::Malformed(format!(
                    "empty bound interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Worst primal constraint violation of `x` (rows, cones, bounds).
    pub fn primal_infeasibility(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, rhs) in &self.eq_rows {
            worst = worst.max((dot(row, x) - rhs).abs());
        }
        for (row, rhs) in &self.ineq_rows {
            worst = worst.max(dot(row, x) - rhs);
        }
        for blk in &self.soc_blocks {
            let norm: f64 = blk
                .m_rows
                .iter()
                .zip(&blk.q)
                .map(|(row, q)| (dot(row, x) + q).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(norm - (dot(&blk.r, x) + blk.s));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            worst = worst.max(lo - x[j]).max(x[j] - hi);
        }
        worst.max(0.0)
    }
}

/// Terminal status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalError,
}

/// Residuals reported with a solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals {
    /// Worst primal constraint violation at the returned point.
    pub primal: f64,
    /// Dual feasibility measure (backend-specific, 0 for a clean simplex basis).
    pub dual: f64,
    /// Duality gap estimate.
    pub gap: f64,
}

/// Outcome of solving a [`ConicProgram`].
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub status: SolveStatus,
    /// Primal point. For `Unbounded` this is an improving ray; for
    /// `Infeasible` it is the last iterate and carries no meaning.
    pub x: Vec<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SolverResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves a conic program with the in-crate dense backends.
///
/// Programs without cone blocks go through the two-phase simplex; anything
/// with a second-order cone goes through the interior-point method. A result
/// with `Optimal` status has been re-checked against the program rows within
/// `tol.feas_tol`-scaled slack.
pub fn solve(p: &ConicProgram, tol: &Tolerances) -> Result<SolverResult, ConicError> {
    p.validate()?;
    let mut res = if p.soc_blocks.is_empty() {
        simplex::solve_lp(p, tol)
    } else {
        ipm::solve_socp(p, tol)
    };
    if res.status == SolveStatus::Optimal {
        let viol = p.primal_infeasibility(&res.x);
        res.residuals.primal = viol;
        // Scale guard: residual checks are relative to problem data magnitude.
        let scale = 1.0
            + p.ineq_rows
                .iter()
                .chain(p.eq_rows.iter())
                .map(|(_, rhs)| rhs.abs())
                .fold(0.0, f64::max);
        if viol > tol.feas_tol.max(1e-7) * scale {
            res.status = SolveStatus::NumericalError;
        }
    }
    Ok(res)
}

/// Dense dot product used across the crate's builders.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
