//! Dense two-phase tableau simplex for programs without cone blocks.
//!
//! The conic program is lowered to standard form `min c·z, A z = b, z ≥ 0`:
//! bounded variables are shifted so their lower bound maps to zero, free
//! variables are split, inequality rows gain slacks, and finite upper bounds
//! become extra rows. Phase 1 runs on a full artificial basis; Dantzig
//! pricing switches to Bland's rule after a degeneracy stall so the method
//! terminates.

use super::{dot, ConicProgram, Residuals, SolveStatus, SolverResult};
use crate::prob::Tolerances;

const PIVOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + z_col, or x = offset - z_col when `negate`.
    Shifted {
        col: usize,
        offset: f64,
        negate: bool,
    },
    /// x = z_pos - z_neg.
    Split { pos: usize, neg: usize },
}

struct StandardLp {
    ncols: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    var_map: Vec<VarMap>,
}

fn lower(p: &ConicProgram) -> StandardLp {
    let n = p.num_vars();
    let mut var_map = Vec::with_capacity(n);
    let mut ncols = 0usize;
    // (column, upper value) rows to append for two-sided bounds
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();

    for &(lo, hi) in p.bounds() {
        if lo.is_finite() {
            let col = ncols;
            ncols += 1;
            var_map.push(VarMap::Shifted {
                col,
                offset: lo,
                negate: false,
            });
            if hi.is_finite() {
                upper_rows.push((col, hi - lo));
            }
        } else if hi.is_finite() {
            let col = ncols;
            ncols += 1;
            var_map.push(VarMap::Shifted {
                col,
                offset: hi,
                negate: true,
            });
        } else {
            let pos = ncols;
            let neg = ncols + 1;
            ncols += 2;
            var_map.push(VarMap::Split { pos, neg });
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    // slot > 0 marks rows that still need a slack column
    let mut needs_slack: Vec<bool> = Vec::new();

    let push_row = |coeffs: &[f64], b: f64, ineq: bool, rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>, needs_slack: &mut Vec<bool>| {
        let mut row = vec![0.0; ncols];
        let mut b_adj = b;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match var_map[j] {
                VarMap::Shifted {
                    col,
                    offset,
                    negate,
                } => {
                    row[col] += if negate { -a } else { a };
                    b_adj -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        rows.push(row);
        rhs.push(b_adj);
        needs_slack.push(ineq);
    };

    for (coeffs, b) in p.eq_rows() {
        push_row(coeffs, *b, false, &mut rows, &mut rhs, &mut needs_slack);
    }
    for (coeffs, b) in p.ineq_rows() {
        push_row(coeffs, *b, true, &mut rows, &mut rhs, &mut needs_slack);
    }
    for (col, ub) in upper_rows {
        let mut row = vec![0.0; ncols];
        row[col] = 1.0;
        rows.push(row);
        rhs.push(ub);
        needs_slack.push(true);
    }

    // append slack columns
    let nslack = needs_slack.iter().filter(|&&s| s).count();
    let first_slack = ncols;
    ncols += nslack;
    let mut slack_idx = first_slack;
    for (i, row) in rows.iter_mut().enumerate() {
        row.resize(ncols, 0.0);
        if needs_slack[i] {
            row[slack_idx] = 1.0;
            slack_idx += 1;
        }
    }

    let mut cost = vec![0.0; ncols];
    for (j, &c) in p.objective().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        match var_map[j] {
            VarMap::Shifted { col, negate, .. } => cost[col] += if negate { -c } else { c },
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    StandardLp {
        ncols,
        rows,
        rhs,
        cost,
        var_map,
    }
}

fn recover_x(p: &ConicProgram, lp: &StandardLp, z: &[f64]) -> Vec<f64> {
    lp.var_map
        .iter()
        .map(|vm| match *vm {
            VarMap::Shifted {
                col,
                offset,
                negate,
            } => {
                if negate {
                    offset - z[col]
                } else {
                    offset + z[col]
                }
            }
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .take(p.num_vars())
        .collect()
}

/// Direction in x-space for an unbounded ray in z-space (offsets dropped).
fn recover_ray(p: &ConicProgram, lp: &StandardLp, dz: &[f64]) -> Vec<f64> {
    lp.var_map
        .iter()
        .map(|vm| match *vm {
            VarMap::Shifted { col, negate, .. } => {
                if negate {
                    -dz[col]
                } else {
                    dz[col]
                }
            }
            VarMap::Split { pos, neg } => dz[pos] - dz[neg],
        })
        .take(p.num_vars())
        .collect()
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    m: usize,
    ncols: usize,
    allowed: Vec<bool>,
    iterations: usize,
}

enum PivotOutcome {
    Optimal,
    Unbounded { entering: usize },
    IterationLimit,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.ncols
    }

    fn objective(&self) -> f64 {
        -self.t[self.m][self.ncols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        let inv = 1.0 / piv;
        for v in self.t[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor == 0.0 {
                continue;
            }
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            r[col] = 0.0; // exact zero, avoids drift
        }
        self.basis[row] = col;
    }

    fn run(&mut self, max_iter: usize) -> PivotOutcome {
        let mut stall = 0usize;
        let mut last_obj = self.objective();
        let stall_limit = 12 * (self.m + 20);
        let mut bland = false;
        loop {
            if self.iterations >= max_iter {
                return PivotOutcome::IterationLimit;
            }
            let cost_row = &self.t[self.m];
            let entering = if bland {
                (0..self.ncols).find(|&j| self.allowed[j] && cost_row[j] < -PIVOT_EPS)
            } else {
                let mut best = None;
                let mut best_val = -PIVOT_EPS;
                for j in 0..self.ncols {
                    if self.allowed[j] && cost_row[j] < best_val {
                        best_val = cost_row[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(e) = entering else {
                return PivotOutcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i][e];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][self.ncols] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio < lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return PivotOutcome::Unbounded { entering: e };
            };
            self.pivot(r, e);
            self.iterations += 1;
            let obj = self.objective();
            if obj < last_obj - 1e-12 {
                last_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }
        }
    }
}

pub(super) fn solve_lp(p: &ConicProgram, tol: &Tolerances) -> SolverResult {
    let lp = lower(p);
    let m = lp.rows.len();
    let fail = |status: SolveStatus| SolverResult {
        status,
        x: vec![0.0; p.num_vars()],
        objective: f64::NAN,
        residuals: Residuals {
            primal: f64::NAN,
            dual: f64::NAN,
            gap: f64::NAN,
        },
        iterations: 0,
    };

    if m == 0 {
        // Only shifted/free columns with no rows: bounded iff all costs stay >= 0.
        if lp.cost.iter().any(|&c| c < 0.0) {
            let dz: Vec<f64> = lp.cost.iter().map(|&c| if c < 0.0 { 1.0 } else { 0.0 }).collect();
            let ray = recover_ray(p, &lp, &dz);
            return SolverResult {
                status: SolveStatus::Unbounded,
                x: ray,
                objective: f64::NEG_INFINITY,
                residuals: Residuals {
                    primal: 0.0,
                    dual: 0.0,
                    gap: 0.0,
                },
                iterations: 0,
            };
        }
        let z = vec![0.0; lp.ncols];
        let x = recover_x(p, &lp, &z);
        let objective = p.objective_value(&x);
        return SolverResult {
            status: SolveStatus::Optimal,
            x,
            objective,
            residuals: Residuals {
                primal: 0.0,
                dual: 0.0,
                gap: 0.0,
            },
            iterations: 0,
        };
    }

    // Build tableau with one artificial column per row; flip rows to b >= 0.
    let ncols = lp.ncols + m;
    let mut t = vec![vec![0.0; ncols + 1]; m + 1];
    for i in 0..m {
        let flip = lp.rhs[i] < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        for j in 0..lp.ncols {
            t[i][j] = sgn * lp.rows[i][j];
        }
        t[i][lp.ncols + i] = 1.0;
        t[i][ncols] = sgn * lp.rhs[i];
    }
    // phase-1 reduced costs: cost of artificials is 1, basis is all artificials
    for j in 0..=ncols {
        let mut s = 0.0;
        for row in t.iter().take(m) {
            s += row[j];
        }
        t[m][j] = if (lp.ncols..ncols).contains(&j) { 1.0 - s } else { -s };
    }

    let mut tab = Tableau {
        t,
        basis: (lp.ncols..ncols).collect(),
        m,
        ncols,
        allowed: vec![true; ncols],
        iterations: 0,
    };
    let max_iter = 400 * (m + ncols) + 20_000;

    match tab.run(max_iter) {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded { .. } => return fail(SolveStatus::NumericalError),
        PivotOutcome::IterationLimit => return fail(SolveStatus::IterationLimit),
    }
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if tab.objective() > tol.feas_tol.max(1e-9) * scale {
        return fail(SolveStatus::Infeasible);
    }

    // Drive basic artificials out; drop redundant rows.
    let mut drop_rows: Vec<usize> = Vec::new();
    for i in 0..tab.m {
        if tab.basis[i] >= lp.ncols {
            let col = (0..lp.ncols).find(|&j| tab.t[i][j].abs() > 1e-7);
            match col {
                Some(j) => tab.pivot(i, j),
                None => drop_rows.push(i),
            }
        }
    }
    for &i in drop_rows.iter().rev() {
        tab.t.remove(i);
        tab.basis.remove(i);
        tab.m -= 1;
    }

    // Phase 2: artificials barred from entering, real costs installed.
    for j in lp.ncols..ncols {
        tab.allowed[j] = false;
    }
    let mrow = tab.m;
    for j in 0..=ncols {
        tab.t[mrow][j] = if j < lp.ncols { lp.cost[j] } else { 0.0 };
    }
    for i in 0..tab.m {
        let cb = if tab.basis[i] < lp.ncols {
            lp.cost[tab.basis[i]]
        } else {
            0.0
        };
        if cb == 0.0 {
            continue;
        }
        let row = tab.t[i].clone();
        for (v, rv) in tab.t[mrow].iter_mut().zip(&row) {
            *v -= cb * rv;
        }
    }

    match tab.run(max_iter) {
        PivotOutcome::Optimal => {}
        PivotOutcome::Unbounded { entering } => {
            let mut dz = vec![0.0; lp.ncols];
            if entering < lp.ncols {
                dz[entering] = 1.0;
            }
            for i in 0..tab.m {
                if tab.basis[i] < lp.ncols {
                    dz[tab.basis[i]] = -tab.t[i][entering];
                }
            }
            let ray = recover_ray(p, &lp, &dz);
            return SolverResult {
                status: SolveStatus::Unbounded,
                x: ray,
                objective: f64::NEG_INFINITY,
                residuals: Residuals {
                    primal: 0.0,
                    dual: 0.0,
                    gap: 0.0,
                },
                iterations: tab.iterations,
            };
        }
        PivotOutcome::IterationLimit => return fail(SolveStatus::IterationLimit),
    }

    let mut z = vec![0.0; ncols];
    for i in 0..tab.m {
        z[tab.basis[i]] = tab.t[i][tab.rhs_col()];
    }
    let x = recover_x(p, &lp, &z);
    let objective = p.objective_value(&x);

    // duals read off the artificial columns; standard-form gap b'y vs c'z
    let mut dual_obj = 0.0;
    let mut art = lp.ncols;
    for i in 0..m {
        if drop_rows.contains(&i) {
            art += 1;
            continue;
        }
        let y_i = -tab.t[tab.m][art];
        // rows were flipped to b >= 0, so y pairs with |rhs|
        dual_obj += y_i * lp.rhs[i].abs();
        art += 1;
    }
    let primal_std: f64 = dot(&lp.cost, &z);
    let dual_res = (0..ncols)
        .filter(|&j| tab.allowed[j])
        .map(|j| (-tab.t[tab.m][j]).max(0.0))
        .fold(0.0, f64::max);

    SolverResult {
        status: SolveStatus::Optimal,
        x,
        objective,
        residuals: Residuals {
            primal: 0.0, // re-checked by the caller against the original program
            dual: dual_res,
            gap: (primal_std - dual_obj).abs(),
        },
        iterations: tab.iterations,
    }
}
