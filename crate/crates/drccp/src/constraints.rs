//! Constraint machinery: the decision polytope X, the uncertainty support Ξ,
//! piecewise-bilinear constraint functions, black-box constraint oracles,
//! distance-to-violation, and Lipschitz bounds in the uncertainty.

use crate::conic::{self, ConicProgram, SolveStatus};
use crate::prob::{Tolerances, WassersteinOrder};
use serde::Deserialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Curvature of ξ ↦ F(x,ξ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Concave,
    Convex,
    Affine,
}

const VERTEX_ENUM_CAP: u128 = 400_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k.min(n - k) {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

/// Enumerates vertices of `{ x : rows·x ≤ rhs }` by basic feasible solutions.
fn enumerate_vertices(
    dim: usize,
    rows: &[(Vec<f64>, f64)],
) -> Result<Vec<Vec<f64>>, ConstraintError> {
    if rows.len() < dim {
        return Err(ConstraintError::Unbounded(
            "fewer facets than dimensions".into(),
        ));
    }
    if binomial(rows.len(), dim) > VERTEX_ENUM_CAP {
        return Err(ConstraintError::TooLarge(format!(
            "vertex enumeration over {} rows in dimension {dim}",
            rows.len()
        )));
    }
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..dim).collect();
    let scale = rows.iter().map(|(_, b)| b.abs()).fold(1.0f64, f64::max);
    loop {
        let mut a = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        let mut b = nalgebra::DVector::<f64>::zeros(dim);
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..dim {
                a[(r, c)] = rows[i].0[c];
            }
            b[r] = rows[i].1;
        }
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().cloned().collect();
            if x.iter().all(|v| v.is_finite())
                && rows
                    .iter()
                    .all(|(row, rhs)| conic::dot(row, &x) <= rhs + 1e-7 * scale)
                && !verts
                    .iter()
                    .any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9))
            {
                verts.push(x);
            }
        }
        // next combination
        let mut i = dim;
        loop {
            if i == 0 {
                return Ok(verts);
            }
            i -= 1;
            if idx[i] != i + rows.len() - dim {
                idx[i] += 1;
                for j in i + 1..dim {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Decision set `X = { x : D x ≤ g }` with optional per-coordinate box bounds.
///
/// Construction certifies nonemptiness with one feasibility LP and records
/// per-coordinate ranges (2n LPs) when the set is bounded.
#[derive(Debug, Clone)]
pub struct PolytopeX {
    dim: usize,
    d_rows: Vec<(Vec<f64>, f64)>,
    box_bounds: Vec<(f64, f64)>,
    feasible_point: Vec<f64>,
    coord_ranges: Option<Vec<(f64, f64)>>,
}

impl PolytopeX {
    pub fn new(
        dim: usize,
        d_rows: Vec<Vec<f64>>,
        g: Vec<f64>,
        box_bounds: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, ConstraintError> {
        if dim == 0 {
            return Err(ConstraintError::Invalid("dimension must be positive".into()));
        }
        if d_rows.len() != g.len() {
            return Err(ConstraintError::Dimension(format!(
                "{} rows vs {} right-hand sides",
                d_rows.len(),
                g.len()
            )));
        }
        for row in &d_rows {
            if row.len() != dim {
                return Err(ConstraintError::Dimension("row length != dim".into()));
            }
        }
        let box_bounds = match box_bounds {
            Some(b) => {
                if b.len() != dim {
                    return Err(ConstraintError::Dimension("box length != dim".into()));
                }
                for &(lo, hi) in &b {
                    if lo > hi {
                        return Err(ConstraintError::EmptySet(format!(
                            "box interval [{lo}, {hi}] is empty"
                        )));
                    }
                }
                b
            }
            None => vec![(f64::NEG_INFINITY, f64::INFINITY); dim],
        };
        let rows: Vec<(Vec<f64>, f64)> = d_rows.into_iter().zip(g).collect();

        let tol = Tolerances::default();
        let base_prog = |obj: Vec<f64>| {
            let mut p = ConicProgram::new(dim);
            p.set_objective(obj);
            for (row, rhs) in &rows {
                p.add_ineq(row.clone(), *rhs);
            }
            for (j, &(lo, hi)) in box_bounds.iter().enumerate() {
                p.set_bounds(j, lo, hi);
            }
            p
        };
        let feas = conic::solve(&base_prog(vec![0.0; dim]), &tol)
            .map_err(|e| ConstraintError::Solver(e.to_string()))?;
        let feasible_point = match feas.status {
            SolveStatus::Optimal => feas.x,
            SolveStatus::Infeasible => {
                return Err(ConstraintError::EmptySet(
                    "decision polytope is empty".into(),
                ))
            }
            s => return Err(ConstraintError::Solver(format!("feasibility check: {s:?}"))),
        };

        let mut coord_ranges = Vec::with_capacity(dim);
        let mut bounded = true;
        for j in 0..dim {
            let mut obj = vec![0.0; dim];
            obj[j] = 1.0;
            let lo = conic::solve(&base_prog(obj.clone()), &tol)
                .map_err(|e| ConstraintError::Solver(e.to_string()))?;
            obj[j] = -1.0;
            let hi = conic::solve(&base_prog(obj), &tol)
                .map_err(|e| ConstraintError::Solver(e.to_string()))?;
            match (lo.status, hi.status) {
                (SolveStatus::Optimal, SolveStatus::Optimal) => {
                    coord_ranges.push((lo.objective, -hi.objective));
                }
                _ => {
                    bounded = false;
                    break;
                }
            }
        }

        Ok(PolytopeX {
            dim,
            d_rows: rows,
            box_bounds,
            feasible_point,
            coord_ranges: bounded.then_some(coord_ranges),
        })
    }

    pub fn from_box(bounds: Vec<(f64, f64)>) -> Result<Self, ConstraintError> {
        let dim = bounds.len();
        PolytopeX::new(dim, Vec::new(), Vec::new(), Some(bounds))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d_rows(&self) -> &[(Vec<f64>, f64)] {
        &self.d_rows
    }

    pub fn box_bounds(&self) -> &[(f64, f64)] {
        &self.box_bounds
    }

    pub fn feasible_point(&self) -> &[f64] {
        &self.feasible_point
    }

    pub fn bounded(&self) -> bool {
        self.coord_ranges.is_some()
    }

    /// Per-coordinate ranges of X; `None` when unbounded.
    pub fn coord_ranges(&self) -> Option<&[(f64, f64)]> {
        self.coord_ranges.as_deref()
    }

    pub fn require_bounded(&self) -> Result<&[(f64, f64)], ConstraintError> {
        self.coord_ranges
            .as_deref()
            .ok_or_else(|| ConstraintError::Unbounded("decision polytope is unbounded".into()))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim {
            return false;
        }
        self.d_rows
            .iter()
            .all(|(row, rhs)| conic::dot(row, x) <= rhs + tol)
            && self
                .box_bounds
                .iter()
                .zip(x)
                .all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol)
    }

    /// All facet rows including finite box bounds, as `row·x ≤ rhs`.
    pub fn all_rows(&self) -> Vec<(Vec<f64>, f64)> {
        let mut rows = self.d_rows.clone();
        for (j, &(lo, hi)) in self.box_bounds.iter().enumerate() {
            if lo.is_finite() {
                let mut r = vec![0.0; self.dim];
                r[j] = -1.0;
                rows.push((r, -lo));
            }
            if hi.is_finite() {
                let mut r = vec![0.0; self.dim];
                r[j] = 1.0;
                rows.push((r, hi));
            }
        }
        rows
    }

    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, ConstraintError> {
        self.require_bounded()?;
        enumerate_vertices(self.dim, &self.all_rows())
    }

    /// Installs `x ∈ X` on program variables `offset..offset+dim`.
    pub(crate) fn install(&self, prog: &mut ConicProgram, offset: usize) {
        let n = prog.num_vars();
        for (row, rhs) in &self.d_rows {
            let mut r = vec![0.0; n];
            r[offset..offset + self.dim].copy_from_slice(row);
            prog.add_ineq(r, *rhs);
        }
        for (j, &(lo, hi)) in self.box_bounds.iter().enumerate() {
            prog.set_bounds(offset + j, lo, hi);
        }
    }
}

/// Uncertainty support Ξ: all of R^m, or a polytope `{ ξ : C ξ ≤ h }`.
#[derive(Debug, Clone)]
pub struct PolyhedralSupport {
    dim: usize,
    rows: Vec<(Vec<f64>, f64)>,
    free: bool,
    coord_ranges: Option<Vec<(f64, f64)>>,
    axis_aligned: bool,
    feasible_point: Vec<f64>,
}

impl PolyhedralSupport {
    pub fn free(dim: usize) -> Self {
        PolyhedralSupport {
            dim,
            rows: Vec::new(),
            free: true,
            coord_ranges: None,
            axis_aligned: true,
            feasible_point: vec![0.0; dim],
        }
    }

    pub fn polytope(
        dim: usize,
        c_rows: Vec<Vec<f64>>,
        h: Vec<f64>,
    ) -> Result<Self, ConstraintError> {
        if c_rows.len() != h.len() {
            return Err(ConstraintError::Dimension("C rows vs h length".into()));
        }
        for r in &c_rows {
            if r.len() != dim {
                return Err(ConstraintError::Dimension("C row length != dim".into()));
            }
        }
        // reuse the polytope certification machinery
        let x = PolytopeX::new(dim, c_rows, h, None).map_err(|e| match e {
            ConstraintError::EmptySet(_) => {
                ConstraintError::EmptySet("uncertainty support is empty".into())
            }
            other => other,
        })?;
        let axis_aligned = x
            .d_rows
            .iter()
            .all(|(row, _)| row.iter().filter(|v| v.abs() > 0.0).count() <= 1);
        Ok(PolyhedralSupport {
            dim,
            rows: x.d_rows.clone(),
            free: false,
            coord_ranges: x.coord_ranges.clone(),
            axis_aligned,
            feasible_point: x.feasible_point.clone(),
        })
    }

    /// Axis-aligned box support.
    pub fn box_support(bounds: Vec<(f64, f64)>) -> Result<Self, ConstraintError> {
        let dim = bounds.len();
        let mut c_rows = Vec::new();
        let mut h = Vec::new();
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if lo > hi {
                return Err(ConstraintError::EmptySet("empty box interval".into()));
            }
            if lo.is_finite() {
                let mut r = vec![0.0; dim];
                r[j] = -1.0;
                c_rows.push(r);
                h.push(-lo);
            }
            if hi.is_finite() {
                let mut r = vec![0.0; dim];
                r[j] = 1.0;
                c_rows.push(r);
                h.push(hi);
            }
        }
        PolyhedralSupport::polytope(dim, c_rows, h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_free(&self) -> bool {
        self.free
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    /// True when Ξ is a (nonempty) compact polytope.
    pub fn compact(&self) -> bool {
        !self.free && self.coord_ranges.is_some()
    }

    pub fn coord_ranges(&self) -> Option<&[(f64, f64)]> {
        self.coord_ranges.as_deref()
    }

    pub fn feasible_point(&self) -> &[f64] {
        &self.feasible_point
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        if xi.len() != self.dim {
            return false;
        }
        self.free
            || self
                .rows
                .iter()
                .all(|(row, rhs)| conic::dot(row, xi) <= rhs + tol)
    }

    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, ConstraintError> {
        if self.free || self.coord_ranges.is_none() {
            return Err(ConstraintError::Unbounded("support is not compact".into()));
        }
        enumerate_vertices(self.dim, &self.rows)
    }

    /// Euclidean projection onto Ξ: identity for free supports, clipping when
    /// every facet is axis-aligned, otherwise a small norm-minimization cone
    /// program.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>, ConstraintError> {
        if self.free {
            return Ok(z.to_vec());
        }
        if self.contains(z, 0.0) {
            return Ok(z.to_vec());
        }
        if self.axis_aligned {
            if let Some(ranges) = &self.coord_ranges {
                return Ok(z
                    .iter()
                    .zip(ranges)
                    .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
                    .collect());
            }
        }
        // min t s.t. ||xi - z|| <= t, C xi <= h
        let m = self.dim;
        let mut prog = ConicProgram::new(m + 1);
        prog.set_objective_coeff(m, 1.0);
        prog.set_bounds(m, 0.0, f64::INFINITY);
        for (row, rhs) in &self.rows {
            let mut r = vec![0.0; m + 1];
            r[..m].copy_from_slice(row);
            prog.add_ineq(r, *rhs);
        }
        let mut m_rows = Vec::with_capacity(m);
        for j in 0..m {
            let mut row = vec![0.0; m + 1];
            row[j] = 1.0;
            m_rows.push(row);
        }
        let q: Vec<f64> = z.iter().map(|v| -v).collect();
        let mut r = vec![0.0; m + 1];
        r[m] = 1.0;
        prog.add_soc(m_rows, q, r, 0.0);
        let res = conic::solve(&prog, &Tolerances::default())
            .map_err(|e| ConstraintError::Solver(e.to_string()))?;
        if res.status != SolveStatus::Optimal {
            return Err(ConstraintError::Solver(format!(
                "projection solve: {:?}",
                res.status
            )));
        }
        Ok(res.x[..m].to_vec())
    }

    /// max over Ξ of `w·ξ`; errors when unbounded in that direction.
    pub fn linear_max(&self, w: &[f64]) -> Result<f64, ConstraintError> {
        if self.free {
            if w.iter().all(|&v| v == 0.0) {
                return Ok(0.0);
            }
            return Err(ConstraintError::Unbounded(
                "linear optimum over a free support".into(),
            ));
        }
        let mut prog = ConicProgram::new(self.dim);
        prog.set_objective(w.iter().map(|v| -v).collect());
        for (row, rhs) in &self.rows {
            prog.add_ineq(row.clone(), *rhs);
        }
        let res = conic::solve(&prog, &Tolerances::default())
            .map_err(|e| ConstraintError::Solver(e.to_string()))?;
        match res.status {
            SolveStatus::Optimal => Ok(-res.objective),
            SolveStatus::Unbounded => Err(ConstraintError::Unbounded(
                "support unbounded along direction".into(),
            )),
            s => Err(ConstraintError::Solver(format!("linear_max: {s:?}"))),
        }
    }
}

/// One piece of a piecewise-bilinear constraint:
/// `(a + Aᵀx)ᵀ ξ + dᵀx + e`.
#[derive(Debug, Clone)]
pub struct Piece {
    /// ξ-coefficients independent of x (length m).
    pub a: Vec<f64>,
    /// Bilinear coupling A, stored as n rows of length m.
    pub coupling: Vec<Vec<f64>>,
    /// x-coefficients of the affine part (length n).
    pub d: Vec<f64>,
    pub e: f64,
}

/// `F(x,ξ) = max_k (a_k + A_kᵀx)ᵀξ + d_kᵀx + e_k`, convex in x and in ξ.
#[derive(Debug, Clone)]
pub struct PiecewiseBilinearConstraint {
    pieces: Vec<Piece>,
    x_dim: usize,
    xi_dim: usize,
}

impl PiecewiseBilinearConstraint {
    pub fn new(pieces: Vec<Piece>, x_dim: usize, xi_dim: usize) -> Result<Self, ConstraintError> {
        if pieces.is_empty() {
            return Err(ConstraintError::Invalid(
                "constraint needs at least one piece".into(),
            ));
        }
        for (k, p) in pieces.iter().enumerate() {
            if p.a.len() != xi_dim || p.d.len() != x_dim || p.coupling.len() != x_dim {
                return Err(ConstraintError::Dimension(format!("piece {k} dimensions")));
            }
            if p.coupling.iter().any(|row| row.len() != xi_dim) {
                return Err(ConstraintError::Dimension(format!(
                    "piece {k} coupling rows must have length {xi_dim}"
                )));
            }
            let finite = p.a.iter().all(|v| v.is_finite())
                && p.d.iter().all(|v| v.is_finite())
                && p.coupling.iter().flatten().all(|v| v.is_finite())
                && p.e.is_finite();
            if !finite {
                return Err(ConstraintError::Invalid(format!(
                    "piece {k} has non-finite data"
                )));
            }
        }
        Ok(PiecewiseBilinearConstraint {
            pieces,
            x_dim,
            xi_dim,
        })
    }

    /// Single-piece constraint `(a + Aᵀx)ᵀξ + dᵀx + e`.
    pub fn single(
        a: Vec<f64>,
        coupling: Vec<Vec<f64>>,
        d: Vec<f64>,
        e: f64,
    ) -> Result<Self, ConstraintError> {
        let m = a.len();
        let n = d.len();
        PiecewiseBilinearConstraint::new(vec![Piece { a, coupling, d, e }], n, m)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn xi_dim(&self) -> usize {
        self.xi_dim
    }

    /// ξ-gradient of piece k at x: `a_k + A_kᵀ x`.
    pub fn xi_gradient(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let p = &self.pieces[k];
        let mut g = p.a.clone();
        for (i, row) in p.coupling.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (j, &v) in row.iter().enumerate() {
                g[j] += v * xi;
            }
        }
        g
    }

    /// Affine part of piece k at x: `d_kᵀx + e_k`.
    pub fn affine_part(&self, k: usize, x: &[f64]) -> f64 {
        let p = &self.pieces[k];
        conic::dot(&p.d, x) + p.e
    }

    pub fn piece_value(&self, k: usize, x: &[f64], xi: &[f64]) -> f64 {
        let p = &self.pieces[k];
        let mut v = conic::dot(&p.d, x) + p.e + conic::dot(&p.a, xi);
        for (i, row) in p.coupling.iter().enumerate() {
            v += x[i] * conic::dot(row, xi);
        }
        v
    }

    pub fn evaluate(&self, x: &[f64], xi: &[f64]) -> f64 {
        (0..self.pieces.len())
            .map(|k| self.piece_value(k, x, xi))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax_piece(&self, x: &[f64], xi: &[f64]) -> usize {
        let mut best = 0;
        let mut best_v = self.piece_value(0, x, xi);
        for k in 1..self.pieces.len() {
            let v = self.piece_value(k, x, xi);
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        best
    }

    /// x-subgradient at (x, ξ): gradient of the active piece, `A_k ξ + d_k`.
    pub fn x_subgradient(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let k = self.argmax_piece(x, xi);
        let p = &self.pieces[k];
        p.coupling
            .iter()
            .zip(&p.d)
            .map(|(row, &d)| conic::dot(row, xi) + d)
            .collect()
    }

    /// ξ-(super/sub)gradient at (x, ξ): ξ-gradient of the active piece.
    pub fn xi_subgradient(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        self.xi_gradient(self.argmax_piece(x, xi), x)
    }

    /// Concavity in ξ holds exactly for a single (affine) piece.
    pub fn concave_in_xi(&self) -> bool {
        self.pieces.len() == 1
    }

    /// Pointwise Lipschitz constant in ξ at a fixed x: `max_k ‖a_k + A_kᵀx‖`.
    pub fn lipschitz_xi_at(&self, x: &[f64]) -> f64 {
        (0..self.pieces.len())
            .map(|k| {
                let g = self.xi_gradient(k, x);
                conic::dot(&g, &g).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Black-box constraint with subgradient access; implementations must be
/// pure (same inputs, same outputs) and callable from concurrent tasks.
pub trait ConstraintOracle: Send + Sync {
    fn x_dim(&self) -> usize;
    fn xi_dim(&self) -> usize;
    fn eval(&self, x: &[f64], xi: &[f64]) -> f64;
    fn subgrad_x(&self, x: &[f64], xi: &[f64]) -> Vec<f64>;
    /// Gradient in ξ (supergradient when concave in ξ).
    fn grad_xi(&self, x: &[f64], xi: &[f64]) -> Vec<f64>;
    /// Convexity in x is required by every consumer in this crate.
    fn convex_in_x(&self) -> bool {
        true
    }
    fn curvature_in_xi(&self) -> Curvature;
    /// Declared Lipschitz constant of ξ ↦ F(x,ξ), uniform over X.
    fn lipschitz_xi(&self) -> f64;
}

/// Either the tractable piecewise-bilinear class or a black-box oracle.
#[derive(Clone)]
pub enum ConstraintFunction {
    Piecewise(PiecewiseBilinearConstraint),
    Oracle(Arc<dyn ConstraintOracle>),
}

impl std::fmt::Debug for ConstraintFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintFunction::Piecewise(p) => write!(f, "Piecewise({} pieces)", p.num_pieces()),
            ConstraintFunction::Oracle(_) => write!(f, "Oracle"),
        }
    }
}

impl ConstraintFunction {
    pub fn x_dim(&self) -> usize {
        match self {
            ConstraintFunction::Piecewise(p) => p.x_dim(),
            ConstraintFunction::Oracle(o) => o.x_dim(),
        }
    }

    pub fn xi_dim(&self) -> usize {
        match self {
            ConstraintFunction::Piecewise(p) => p.xi_dim(),
            ConstraintFunction::Oracle(o) => o.xi_dim(),
        }
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        match self {
            ConstraintFunction::Piecewise(p) => p.evaluate(x, xi),
            ConstraintFunction::Oracle(o) => o.eval(x, xi),
        }
    }

    pub fn grad_xi(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        match self {
            ConstraintFunction::Piecewise(p) => p.xi_subgradient(x, xi),
            ConstraintFunction::Oracle(o) => o.grad_xi(x, xi),
        }
    }

    pub fn subgrad_x(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        match self {
            ConstraintFunction::Piecewise(p) => p.x_subgradient(x, xi),
            ConstraintFunction::Oracle(o) => o.subgrad_x(x, xi),
        }
    }

    pub fn curvature_in_xi(&self) -> Curvature {
        match self {
            ConstraintFunction::Piecewise(p) => {
                if p.concave_in_xi() {
                    Curvature::Affine
                } else {
                    Curvature::Convex
                }
            }
            ConstraintFunction::Oracle(o) => o.curvature_in_xi(),
        }
    }
}

/// Evaluates F(x,ξ) with dimension checking.
pub fn evaluate(f: &ConstraintFunction, x: &[f64], xi: &[f64]) -> Result<f64, ConstraintError> {
    if x.len() != f.x_dim() || xi.len() != f.xi_dim() {
        return Err(ConstraintError::Dimension(format!(
            "evaluate: got ({}, {}), constraint expects ({}, {})",
            x.len(),
            xi.len(),
            f.x_dim(),
            f.xi_dim()
        )));
    }
    Ok(f.eval(x, xi))
}

/// Upper bound on `max_k sup_{x∈X} ‖a_k + A_kᵀx‖₂` via per-coordinate
/// interval bounds of the ξ-gradient over X (two LPs per coordinate) followed
/// by the norm of the interval hull. Conservative by construction.
pub fn lipschitz_xi_bound(
    f: &PiecewiseBilinearConstraint,
    x_set: &PolytopeX,
) -> Result<f64, ConstraintError> {
    x_set.require_bounded()?;
    let tol = Tolerances::default();
    let n = x_set.dim();
    if n != f.x_dim() {
        return Err(ConstraintError::Dimension("X dimension vs constraint".into()));
    }
    let mut best: f64 = 0.0;
    for piece in f.pieces() {
        let mut sq = 0.0;
        for j in 0..f.xi_dim() {
            // gradient coordinate j is a_j + sum_i A[i][j] x_i
            let lin: Vec<f64> = (0..n).map(|i| piece.coupling[i][j]).collect();
            let mut bounds = [0.0f64; 2];
            for (which, sign) in [(0usize, 1.0f64), (1usize, -1.0f64)] {
                let mut p = ConicProgram::new(n);
                p.set_objective(lin.iter().map(|v| sign * v).collect());
                for (row, rhs) in x_set.d_rows() {
                    p.add_ineq(row.clone(), *rhs);
                }
                for (i, &(lo, hi)) in x_set.box_bounds().iter().enumerate() {
                    p.set_bounds(i, lo, hi);
                }
                let res =
                    conic::solve(&p, &tol).map_err(|e| ConstraintError::Solver(e.to_string()))?;
                if res.status != SolveStatus::Optimal {
                    return Err(ConstraintError::Unbounded(format!(
                        "gradient bound solve: {:?}",
                        res.status
                    )));
                }
                bounds[which] = sign * res.objective;
            }
            let lo = piece.a[j] + bounds[0];
            let hi = piece.a[j] + bounds[1];
            let c = lo.abs().max(hi.abs());
            sq += c * c;
        }
        best = best.max(sq.sqrt());
    }
    Ok(best)
}

/// Grid fallback configuration for distance-to-violation and related sweeps.
#[derive(Debug, Clone, Copy, Deserialize, serde::Serialize)]
pub struct GridConfig {
    /// Grid points per coordinate (inclusive of endpoints).
    pub points_per_dim: usize,
    /// Half-width of the search window around the sample on free supports.
    pub free_half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points_per_dim: 201,
            free_half_width: 10.0,
        }
    }
}

/// Iterator over a dense grid on a box.
pub struct GridIter {
    ranges: Vec<(f64, f64)>,
    per_dim: usize,
    idx: Vec<usize>,
    done: bool,
}

impl GridIter {
    pub fn new(ranges: &[(f64, f64)], per_dim: usize) -> GridIter {
        GridIter {
            ranges: ranges.to_vec(),
            per_dim: per_dim.max(2),
            idx: vec![0; ranges.len()],
            done: ranges.is_empty(),
        }
    }

    /// Largest cell width over the coordinates.
    pub fn resolution(ranges: &[(f64, f64)], per_dim: usize) -> f64 {
        ranges
            .iter()
            .map(|&(lo, hi)| (hi - lo) / (per_dim.max(2) - 1) as f64)
            .fold(0.0, f64::max)
    }
}

impl Iterator for GridIter {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let pt: Vec<f64> = self
            .idx
            .iter()
            .zip(&self.ranges)
            .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (self.per_dim - 1) as f64)
            .collect();
        let mut k = 0;
        loop {
            if k == self.idx.len() {
                self.done = true;
                break;
            }
            self.idx[k] += 1;
            if self.idx[k] < self.per_dim {
                break;
            }
            self.idx[k] = 0;
            k += 1;
        }
        Some(pt)
    }
}

/// Distance-to-violation value; `value` is `+∞` when no uncertainty
/// realization violates the constraint at x.
#[derive(Debug, Clone, Copy)]
pub struct DistanceToViolation {
    /// `inf { d(ξ, ξ̂)^p : ξ ∈ Ξ, F(x,ξ) > 0 }` (closure semantics).
    pub value: f64,
    /// Grid resolution when the fallback was used; `None` for the analytic path.
    pub grid_resolution: Option<f64>,
}

/// Distance (to the p-th power) from a sample to the closure of the violating
/// set `{ ξ ∈ Ξ : F(x,ξ) > 0 }`.
///
/// Piecewise-bilinear constraints on a free support admit the analytic
/// halfspace-distance form; a zero-gradient piece is violating everywhere or
/// nowhere depending on the sign of its constant part. Polytope supports and
/// black-box oracles fall back to a grid projection whose resolution is
/// reported in the result.
pub fn distance_to_violation(
    f: &ConstraintFunction,
    x: &[f64],
    xi_hat: &[f64],
    p: WassersteinOrder,
    support: &PolyhedralSupport,
    grid: &GridConfig,
) -> Result<DistanceToViolation, ConstraintError> {
    if x.len() != f.x_dim() || xi_hat.len() != f.xi_dim() || support.dim() != f.xi_dim() {
        return Err(ConstraintError::Dimension(
            "distance_to_violation inputs".into(),
        ));
    }
    if let (ConstraintFunction::Piecewise(pw), true) = (f, support.is_free()) {
        let mut best = f64::INFINITY;
        for k in 0..pw.num_pieces() {
            let grad = pw.xi_gradient(k, x);
            let norm = conic::dot(&grad, &grad).sqrt();
            let value_at_sample = pw.piece_value(k, x, xi_hat);
            let dist = if norm <= 1e-14 {
                // constant piece: violating set is everything or empty
                if value_at_sample > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (-value_at_sample).max(0.0) / norm
            };
            best = best.min(dist);
        }
        return Ok(DistanceToViolation {
            value: best.powf(p.exponent()),
            grid_resolution: None,
        });
    }

    // grid projection fallback
    let ranges: Vec<(f64, f64)> = if support.is_free() {
        xi_hat
            .iter()
            .map(|&v| (v - grid.free_half_width, v + grid.free_half_width))
            .collect()
    } else {
        support
            .coord_ranges()
            .ok_or_else(|| {
                ConstraintError::Unbounded("grid fallback needs a compact support".into())
            })?
            .to_vec()
    };
    let total: f64 = (grid.points_per_dim as f64).powi(ranges.len() as i32);
    if total > 4e7 {
        return Err(ConstraintError::TooLarge(format!(
            "grid of {total:.0} points in dimension {}",
            ranges.len()
        )));
    }
    let mut best_sq = f64::INFINITY;
    for pt in GridIter::new(&ranges, grid.points_per_dim) {
        if !support.contains(&pt, 1e-9) {
            continue;
        }
        if f.eval(x, &pt) > 0.0 {
            let d2: f64 = pt
                .iter()
                .zip(xi_hat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best_sq = best_sq.min(d2);
        }
    }
    let value = if best_sq.is_finite() {
        match p {
            WassersteinOrder::One => best_sq.sqrt(),
            WassersteinOrder::Two => best_sq,
        }
    } else {
        f64::INFINITY
    };
    Ok(DistanceToViolation {
        value,
        grid_resolution: Some(GridIter::resolution(&ranges, grid.points_per_dim)),
    })
}

/// Report from validating declared gradients against central finite
/// differences.
#[derive(Debug, Clone, Copy)]
pub struct SubgradientCheck {
    pub points_checked: usize,
    pub points_skipped: usize,
    pub worst_rel_error: f64,
}

/// Compares `subgrad_x` / `grad_xi` with central finite differences (step
/// 1e-6) at the given points; points where the function looks locally kinked
/// are skipped.
pub fn check_subgradients(
    f: &ConstraintFunction,
    points: &[(Vec<f64>, Vec<f64>)],
    rel_tol: f64,
) -> Result<SubgradientCheck, ConstraintError> {
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for (x, xi) in points {
        if x.len() != f.x_dim() || xi.len() != f.xi_dim() {
            return Err(ConstraintError::Dimension("check point dimensions".into()));
        }
        let kinked = match f {
            ConstraintFunction::Piecewise(pw) => {
                // near-ties between pieces make finite differences meaningless
                let vals: Vec<f64> = (0..pw.num_pieces())
                    .map(|k| pw.piece_value(k, x, xi))
                    .collect();
                let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                vals.iter().filter(|&&v| top - v < 1e-4).count() > 1
            }
            ConstraintFunction::Oracle(_) => false,
        };
        if kinked {
            skipped += 1;
            continue;
        }
        checked += 1;
        let gx = f.subgrad_x(x, xi);
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let fd = (f.eval(&xp, xi) - f.eval(&xm, xi)) / (2.0 * step);
            let denom = gx[j].abs().max(fd.abs()).max(1.0);
            worst = worst.max((gx[j] - fd).abs() / denom);
        }
        let gxi = f.grad_xi(x, xi);
        for j in 0..xi.len() {
            let mut xp = xi.clone();
            let mut xm = xi.clone();
            xp[j] += step;
            xm[j] -= step;
            let fd = (f.eval(x, &xp) - f.eval(x, &xm)) / (2.0 * step);
            let denom = gxi[j].abs().max(fd.abs()).max(1.0);
            worst = worst.max((gxi[j] - fd).abs() / denom);
        }
    }
    if worst > rel_tol {
        return Err(ConstraintError::Invalid(format!(
            "subgradient check failed: worst relative error {worst:.3e} > {rel_tol:.3e}"
        )));
    }
    Ok(SubgradientCheck {
        points_checked: checked,
        points_skipped: skipped,
        worst_rel_error: worst,
    })
}

// ---------------------------------------------------------------------------
// JSON constraint specification

/// One piece in the JSON constraint spec.
#[derive(Debug, Clone, Deserialize)]
pub struct PieceSpec {
    pub a: Vec<f64>,
    #[serde(rename = "A")]
    pub coupling: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    #[serde(default)]
    pub e: f64,
}

/// Support in the JSON spec: `"free"` or `{C, h}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SupportSpec {
    Keyword(String),
    Polytope {
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
        h: Vec<f64>,
    },
}

/// Decision set in the JSON spec.
#[derive(Debug, Clone, Deserialize)]
pub struct XSpec {
    #[serde(rename = "D", default)]
    pub d: Vec<Vec<f64>>,
    #[serde(default)]
    pub g: Vec<f64>,
    #[serde(rename = "box", default)]
    pub box_bounds: Option<Vec<(f64, f64)>>,
}

impl PieceSpec {
    pub fn into_piece(self) -> Piece {
        Piece {
            a: self.a,
            coupling: self.coupling,
            d: self.d,
            e: self.e,
        }
    }
}

pub fn pieces_from_specs(
    specs: Vec<PieceSpec>,
) -> Result<PiecewiseBilinearConstraint, ConstraintError> {
    if specs.is_empty() {
        return Err(ConstraintError::Invalid("no pieces given".into()));
    }
    let m = specs[0].a.len();
    let n = specs[0].d.len();
    PiecewiseBilinearConstraint::new(specs.into_iter().map(PieceSpec::into_piece).collect(), n, m)
}

impl SupportSpec {
    pub fn into_support(self, dim: usize) -> Result<PolyhedralSupport, ConstraintError> {
        match self {
            SupportSpec::Keyword(k) if k == "free" => Ok(PolyhedralSupport::free(dim)),
            SupportSpec::Keyword(k) => Err(ConstraintError::Parse(format!(
                "unknown support keyword {k:?}, expected \"free\""
            ))),
            SupportSpec::Polytope { c, h } => PolyhedralSupport::polytope(dim, c, h),
        }
    }
}

impl XSpec {
    pub fn into_polytope(self, dim: usize) -> Result<PolytopeX, ConstraintError> {
        PolytopeX::new(dim, self.d, self.g, self.box_bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_constraint() -> PiecewiseBilinearConstraint {
        // F(x, xi) = xi - x
        PiecewiseBilinearConstraint::single(vec![1.0], vec![vec![0.0]], vec![-1.0], 0.0).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let f = ConstraintFunction::Piecewise(toy_constraint());
        assert!((evaluate(&f, &[1.5], &[1.0]).unwrap() + 0.5).abs() < 1e-15);

        // max(xi - x, -xi - x)
        let two = PiecewiseBilinearConstraint::new(
            vec![
                Piece {
                    a: vec![1.0],
                    coupling: vec![vec![0.0]],
                    d: vec![-1.0],
                    e: 0.0,
                },
                Piece {
                    a: vec![-1.0],
                    coupling: vec![vec![0.0]],
                    d: vec![-1.0],
                    e: 0.0,
                },
            ],
            1,
            1,
        )
        .unwrap();
        let f2 = ConstraintFunction::Piecewise(two);
        assert!((evaluate(&f2, &[0.0], &[-2.0]).unwrap() - 2.0).abs() < 1e-15);

        // K = 1 equals its single piece
        let g = toy_constraint();
        assert_eq!(g.evaluate(&[0.3], &[0.9]), g.piece_value(0, &[0.3], &[0.9]));
    }

    #[test]
    fn polytope_certification() {
        let x = PolytopeX::from_box(vec![(0.0, 2.0)]).unwrap();
        assert!(x.bounded());
        assert_eq!(x.coord_ranges().unwrap(), &[(0.0, 2.0)]);
        assert!(x.contains(&[1.0], 1e-9));
        assert!(!x.contains(&[2.5], 1e-9));

        // x1 + x2 <= -1 with x >= 0 is empty
        let res = PolytopeX::new(
            2,
            vec![vec![1.0, 1.0]],
            vec![-1.0],
            Some(vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)]),
        );
        assert!(matches!(res, Err(ConstraintError::EmptySet(_))));

        let unbounded = PolytopeX::new(1, vec![vec![-1.0]], vec![0.0], None).unwrap();
        assert!(!unbounded.bounded());
        assert!(unbounded.require_bounded().is_err());
    }

    #[test]
    fn vertices_of_a_box() {
        let x = PolytopeX::from_box(vec![(0.0, 1.0), (-1.0, 2.0)]).unwrap();
        let mut v = x.vertices().unwrap();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], vec![0.0, -1.0]);
        assert_eq!(v[3], vec![1.0, 2.0]);
    }

    #[test]
    fn lipschitz_bound_examples() {
        // F = xi - x on any bounded X: gradient is constantly 1
        let f = toy_constraint();
        let x = PolytopeX::from_box(vec![(0.0, 2.0)]).unwrap();
        let l = lipschitz_xi_bound(&f, &x).unwrap();
        assert!((l - 1.0).abs() < 1e-9);

        // a = 0, A = I, X = [0,2]: gradient = x, sup norm 2
        let f = PiecewiseBilinearConstraint::single(vec![0.0], vec![vec![1.0]], vec![0.0], 0.0)
            .unwrap();
        let l = lipschitz_xi_bound(&f, &x).unwrap();
        assert!((l - 2.0).abs() < 1e-9);

        // two pieces with gradient norms 1 and 3
        let f = PiecewiseBilinearConstraint::new(
            vec![
                Piece {
                    a: vec![1.0],
                    coupling: vec![vec![0.0]],
                    d: vec![0.0],
                    e: 0.0,
                },
                Piece {
                    a: vec![3.0],
                    coupling: vec![vec![0.0]],
                    d: vec![0.0],
                    e: 0.0,
                },
            ],
            1,
            1,
        )
        .unwrap();
        let l = lipschitz_xi_bound(&f, &x).unwrap();
        assert!(l >= 3.0 - 1e-12);
    }

    #[test]
    fn distance_examples() {
        let f = ConstraintFunction::Piecewise(toy_constraint());
        let free = PolyhedralSupport::free(1);
        let cfg = GridConfig::default();

        let d = distance_to_violation(&f, &[1.5], &[0.0], WassersteinOrder::One, &free, &cfg)
            .unwrap();
        assert!((d.value - 1.5).abs() < 1e-12);
        assert!(d.grid_resolution.is_none());

        let d = distance_to_violation(&f, &[0.5], &[1.0], WassersteinOrder::One, &free, &cfg)
            .unwrap();
        assert_eq!(d.value, 0.0);

        // F == -1: no violating set
        let neg = PiecewiseBilinearConstraint::single(vec![0.0], vec![vec![0.0]], vec![0.0], -1.0)
            .unwrap();
        let d = distance_to_violation(
            &ConstraintFunction::Piecewise(neg),
            &[0.3],
            &[0.7],
            WassersteinOrder::Two,
            &free,
            &cfg,
        )
        .unwrap();
        assert!(d.value.is_infinite());
    }

    #[test]
    fn distance_zero_iff_nonnegative_value() {
        let f = ConstraintFunction::Piecewise(toy_constraint());
        let free = PolyhedralSupport::free(1);
        let cfg = GridConfig::default();
        // boundary: F(x, xi_hat) = 0 exactly
        let d = distance_to_violation(&f, &[1.0], &[1.0], WassersteinOrder::One, &free, &cfg)
            .unwrap();
        assert_eq!(d.value, 0.0);
        let d = distance_to_violation(&f, &[1.0], &[0.999], WassersteinOrder::One, &free, &cfg)
            .unwrap();
        assert!(d.value > 0.0);
    }

    #[test]
    fn grid_fallback_matches_analytic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cfg = GridConfig {
            points_per_dim: 301,
            free_half_width: 6.0,
        };

        struct Wrap(PiecewiseBilinearConstraint);
        impl ConstraintOracle for Wrap {
            fn x_dim(&self) -> usize {
                self.0.x_dim()
            }
            fn xi_dim(&self) -> usize {
                self.0.xi_dim()
            }
            fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
                self.0.evaluate(x, xi)
            }
            fn subgrad_x(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
                self.0.x_subgradient(x, xi)
            }
            fn grad_xi(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
                self.0.xi_subgradient(x, xi)
            }
            fn curvature_in_xi(&self) -> Curvature {
                Curvature::Affine
            }
            fn lipschitz_xi(&self) -> f64 {
                10.0
            }
        }

        for trial in 0..60 {
            let m = rng.gen_range(1..3usize);
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if a.iter().all(|v| v.abs() < 0.2) {
                continue; // keep gradients well away from zero
            }
            let coupling = vec![vec![0.0; m]; 1];
            let d = vec![rng.gen_range(-1.0..1.0)];
            let e = rng.gen_range(-1.0..1.0);
            let pw = PiecewiseBilinearConstraint::single(a, coupling, d, e).unwrap();
            let free = PolyhedralSupport::free(m);
            let x = vec![rng.gen_range(-1.0..1.0)];
            let xi_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let f = ConstraintFunction::Piecewise(pw.clone());
            let analytic =
                distance_to_violation(&f, &x, &xi_hat, WassersteinOrder::One, &free, &cfg)
                    .unwrap();
            let wrapped = ConstraintFunction::Oracle(Arc::new(Wrap(pw)));
            let grid =
                distance_to_violation(&wrapped, &x, &xi_hat, WassersteinOrder::One, &free, &cfg)
                    .unwrap();
            let res = grid.grid_resolution.unwrap();
            if analytic.value.is_infinite() {
                assert!(grid.value.is_infinite(), "trial {trial}");
                continue;
            }
            if analytic.value > 4.0 {
                continue; // optimum can fall outside the search window
            }
            assert!(
                grid.value >= analytic.value - 1e-9,
                "trial {trial}: grid below analytic"
            );
            let slack = res * (m as f64).sqrt() + 1e-9;
            assert!(
                grid.value - analytic.value <= slack,
                "trial {trial}: grid {} analytic {} slack {slack}",
                grid.value,
                analytic.value
            );
        }
    }

    #[test]
    fn subgradient_finite_difference_check() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let pw = PiecewiseBilinearConstraint::new(
            vec![
                Piece {
                    a: vec![1.0, -0.5],
                    coupling: vec![vec![0.5, 0.2], vec![-0.3, 0.8]],
                    d: vec![-1.0, 0.4],
                    e: 0.1,
                },
                Piece {
                    a: vec![-0.2, 0.9],
                    coupling: vec![vec![0.1, -0.6], vec![0.7, 0.0]],
                    d: vec![0.3, -0.8],
                    e: -0.4,
                },
            ],
            2,
            2,
        )
        .unwrap();
        let f = ConstraintFunction::Piecewise(pw);
        let points: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
            .map(|_| {
                (
                    (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let report = check_subgradients(&f, &points, 1e-4).unwrap();
        assert!(report.points_checked > 50);
        assert!(report.worst_rel_error < 1e-4);
    }

    #[test]
    fn support_projection() {
        let sup = PolyhedralSupport::box_support(vec![(-1.0, 3.0)]).unwrap();
        assert!(sup.compact());
        assert_eq!(sup.project(&[5.0]).unwrap(), vec![3.0]);
        assert_eq!(sup.project(&[0.5]).unwrap(), vec![0.5]);

        // triangle support: x1 + x2 <= 1, x >= 0
        let sup = PolyhedralSupport::polytope(
            2,
            vec![vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let p = sup.project(&[1.0, 1.0]).unwrap();
        assert!(
            (p[0] - 0.5).abs() < 1e-6 && (p[1] - 0.5).abs() < 1e-6,
            "{p:?}"
        );
        let m = sup.linear_max(&[1.0, 1.0]).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn json_specs_parse() {
        let pieces: Vec<PieceSpec> =
            serde_json::from_str(r#"[{"a": [1.0], "A": [[0.0]], "d": [-1.0], "e": 0.0}]"#).unwrap();
        let f = pieces_from_specs(pieces).unwrap();
        assert_eq!(f.num_pieces(), 1);

        let sup: SupportSpec = serde_json::from_str(r#""free""#).unwrap();
        assert!(sup.into_support(1).unwrap().is_free());
        let sup: SupportSpec =
            serde_json::from_str(r#"{"C": [[1.0],[-1.0]], "h": [3.0, 1.0]}"#).unwrap();
        let sup = sup.into_support(1).unwrap();
        assert!(sup.compact());
        assert_eq!(sup.coord_ranges().unwrap(), &[(-1.0, 3.0)]);

        let x: XSpec = serde_json::from_str(r#"{"box": [[0.0, 2.0]]}"#).unwrap();
        let x = x.into_polytope(1).unwrap();
        assert!(x.contains(&[1.2], 0.0));
    }
}
