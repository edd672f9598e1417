//! Dense homogeneous self-dual interior-point method with Nesterov-Todd
//! scaling for programs with second-order cone blocks.
//!
//! The program is lowered to
//!
//! ```text
//! min c·x   s.t.  A x = b,   G x + s = h,   s ∈ K,
//! ```
//!
//! with `K` a product of a nonnegative orthant and second-order cones, then
//! embedded in the standard homogeneous model with scalars (τ, κ). Mehrotra
//! predictor-corrector steps solve one dense KKT factorization per iteration
//! (nalgebra LU, static regularization, iterative refinement). Infeasibility
//! and unboundedness come out of the embedding as certificates.

use super::{dot, ConicProgram, Residuals, SolveStatus, SolverResult};
use crate::prob::Tolerances;
use nalgebra::{DMatrix, DVector};

const MAX_ITER: usize = 200;
const REG: f64 = 1e-10;

struct Cones {
    orthant: usize,
    /// Full block dimensions (1 + rows of M).
    socs: Vec<usize>,
}

impl Cones {
    fn total(&self) -> usize {
        self.orthant + self.socs.iter().sum::<usize>()
    }
    fn degree(&self) -> f64 {
        (self.orthant + self.socs.len()) as f64
    }
    /// Identity element (ones on the orthant, (1,0,…) per cone block).
    fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.total()];
        for v in e.iter_mut().take(self.orthant) {
            *v = 1.0;
        }
        let mut off = self.orthant;
        for &d in &self.socs {
            e[off] = 1.0;
            off += d;
        }
        e
    }

    /// Largest step α ≥ 0 keeping `u + α du` in the cone (∞ if unconstrained).
    fn max_step(&self, u: &[f64], du: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.orthant {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        let mut off = self.orthant;
        for &d in &self.socs {
            let (u0, u1) = (u[off], &u[off + 1..off + d]);
            let (d0, d1) = (du[off], &du[off + 1..off + d]);
            let a = d0 * d0 - dot(d1, d1);
            let b = 2.0 * (u0 * d0 - dot(u1, d1));
            let c = u0 * u0 - dot(u1, u1);
            alpha = alpha.min(smallest_positive_root(a, b, c));
            off += d;
        }
        alpha
    }

    fn jordan_prod(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total()];
        for i in 0..self.orthant {
            out[i] = u[i] * v[i];
        }
        let mut off = self.orthant;
        for &d in &self.socs {
            let (ub, vb) = (&u[off..off + d], &v[off..off + d]);
            out[off] = dot(ub, vb);
            for i in 1..d {
                out[off + i] = ub[0] * vb[i] + vb[0] * ub[i];
            }
            off += d;
        }
        out
    }

    /// Solves λ ∘ v = d for v (arrow-matrix inverse on cone blocks).
    fn jordan_solve(&self, lambda: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total()];
        for i in 0..self.orthant {
            out[i] = d[i] / lambda[i];
        }
        let mut off = self.orthant;
        for &dim in &self.socs {
            let l0 = lambda[off];
            let l1 = &lambda[off + 1..off + dim];
            let d0 = d[off];
            let d1 = &d[off + 1..off + dim];
            let det = l0 * l0 - dot(l1, l1);
            let v0 = (l0 * d0 - dot(l1, d1)) / det;
            out[off] = v0;
            for i in 1..dim {
                out[off + i] = (d1[i - 1] - v0 * l1[i - 1]) / l0;
            }
            off += dim;
        }
        out
    }
}

/// Smallest α > 0 with aα² + bα + c = 0, assuming c ≥ 0; ∞ when the
/// quadratic stays positive on α > 0.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let eps = 1e-14;
    if a.abs() < eps {
        if b < -eps {
            return (-c / b).max(0.0);
        }
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY; // only possible with a > 0: stays positive
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = [f64::INFINITY; 2];
    if q.abs() > 0.0 {
        roots[0] = q / a;
        roots[1] = c / q;
    } else {
        roots[0] = 0.0;
    }
    let mut best = f64::INFINITY;
    for r in roots {
        if r > eps && r < best {
            best = r;
        }
    }
    best
}

struct SocScaling {
    eta: f64,
    wbar: Vec<f64>,
    u: Vec<f64>,
}

struct Scaling {
    orthant_w: Vec<f64>,
    socs: Vec<SocScaling>,
}

impl Scaling {
    /// NT scaling point from strictly interior s, z: W z = W⁻¹ s.
    fn compute(cones: &Cones, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let mut orthant_w = Vec::with_capacity(cones.orthant);
        for i in 0..cones.orthant {
            if s[i] <= 0.0 || z[i] <= 0.0 {
                return None;
            }
            orthant_w.push((s[i] / z[i]).sqrt());
        }
        let mut socs = Vec::with_capacity(cones.socs.len());
        let mut off = cones.orthant;
        for &d in &cones.socs {
            let sb = &s[off..off + d];
            let zb = &z[off..off + d];
            let rs2 = sb[0] * sb[0] - dot(&sb[1..], &sb[1..]);
            let rz2 = zb[0] * zb[0] - dot(&zb[1..], &zb[1..]);
            if rs2 <= 0.0 || rz2 <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0 {
                return None;
            }
            let (rs, rz) = (rs2.sqrt(), rz2.sqrt());
            let sbar: Vec<f64> = sb.iter().map(|v| v / rs).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / rz).collect();
            let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
            // wbar = (sbar + J zbar) / (2 gamma), on the unit hyperboloid
            let mut wbar = vec![0.0; d];
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for i in 1..d {
                wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
            }
            let denom = (2.0 * (wbar[0] + 1.0)).sqrt();
            let mut u = wbar.clone();
            u[0] += 1.0;
            for v in u.iter_mut() {
                *v /= denom;
            }
            socs.push(SocScaling {
                eta: (rs / rz).sqrt(),
                wbar,
                u,
            });
            off += d;
        }
        Some(Scaling { orthant_w, socs })
    }

    // out = scale * (2 * vecpart * (vecpart · v) - J v) over one block
    fn apply_block(scale: f64, vecpart: &[f64], v: &[f64], out: &mut [f64]) {
        let inner = dot(vecpart, v);
        out[0] = scale * (2.0 * vecpart[0] * inner - v[0]);
        for i in 1..v.len() {
            out[i] = scale * (2.0 * vecpart[i] * inner + v[i]);
        }
    }

    /// W v.
    fn apply_w(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cones.total()];
        for i in 0..cones.orthant {
            out[i] = self.orthant_w[i] * v[i];
        }
        let mut off = cones.orthant;
        for (blk, &d) in self.socs.iter().zip(&cones.socs) {
            Scaling::apply_block(blk.eta, &blk.u, &v[off..off + d], &mut out[off..off + d]);
            off += d;
        }
        out
    }

    /// W⁻¹ v  (uses W⁻¹ = η⁻¹ (2 (Ju)(Ju)ᵀ − J)).
    fn apply_winv(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cones.total()];
        for i in 0..cones.orthant {
            out[i] = v[i] / self.orthant_w[i];
        }
        let mut off = cones.orthant;
        for (blk, &d) in self.socs.iter().zip(&cones.socs) {
            let ju: Vec<f64> = blk
                .u
                .iter()
                .enumerate()
                .map(|(i, &x)| if i == 0 { x } else { -x })
                .collect();
            Scaling::apply_block(1.0 / blk.eta, &ju, &v[off..off + d], &mut out[off..off + d]);
            off += d;
        }
        out
    }

    /// W² v.
    fn apply_w2(&self, cones: &Cones, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cones.total()];
        for i in 0..cones.orthant {
            out[i] = self.orthant_w[i] * self.orthant_w[i] * v[i];
        }
        let mut off = cones.orthant;
        for (blk, &d) in self.socs.iter().zip(&cones.socs) {
            Scaling::apply_block(
                blk.eta * blk.eta,
                &blk.wbar,
                &v[off..off + d],
                &mut out[off..off + d],
            );
            off += d;
        }
        out
    }
}

struct Lowered {
    n: usize,
    p: usize,
    m: usize,
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
    cones: Cones,
}

fn lower(prog: &ConicProgram) -> Lowered {
    let n = prog.num_vars();
    let mut g: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    for (row, rhs) in prog.ineq_rows() {
        g.push(row.clone());
        h.push(*rhs);
    }
    for (j, &(lo, hi)) in prog.bounds().iter().enumerate() {
        if lo.is_finite() {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            g.push(row);
            h.push(-lo);
        }
        if hi.is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            g.push(row);
            h.push(hi);
        }
    }
    let orthant = g.len();
    let mut socs = Vec::new();
    for blk in prog.soc_blocks() {
        let d = blk.m_rows.len() + 1;
        socs.push(d);
        g.push(blk.r.iter().map(|v| -v).collect());
        h.push(blk.s);
        for (row, q) in blk.m_rows.iter().zip(&blk.q) {
            g.push(row.iter().map(|v| -v).collect());
            h.push(*q);
        }
    }
    let a: Vec<Vec<f64>> = prog.eq_rows().iter().map(|(r, _)| r.clone()).collect();
    let b: Vec<f64> = prog.eq_rows().iter().map(|(_, rhs)| *rhs).collect();
    Lowered {
        n,
        p: a.len(),
        m: g.len(),
        c: prog.objective().to_vec(),
        a,
        b,
        g,
        h,
        cones: Cones { orthant, socs },
    }
}

struct Kkt {
    dim: usize,
    lo: Lowered2,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k_true: DMatrix<f64>,
}

/// Variable block sizes needed to split KKT solutions.
struct Lowered2 {
    n: usize,
    p: usize,
}

impl Kkt {
    fn factor(lo: &Lowered, scaling: &Scaling) -> Kkt {
        let dim = lo.n + lo.p + lo.m;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        for (i, row) in lo.a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                k[(lo.n + i, j)] = v;
                k[(j, lo.n + i)] = v;
            }
        }
        for (i, row) in lo.g.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                k[(lo.n + lo.p + i, j)] = v;
                k[(j, lo.n + lo.p + i)] = v;
            }
        }
        // -W^2 block, built column by column through the structured apply
        let base = lo.n + lo.p;
        let mut unit = vec![0.0; lo.m];
        for jj in 0..lo.m {
            unit[jj] = 1.0;
            let col = scaling.apply_w2(&lo.cones, &unit);
            unit[jj] = 0.0;
            for (ii, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    k[(base + ii, base + jj)] = -v;
                }
            }
        }
        let k_true = k.clone();
        for i in 0..lo.n {
            k[(i, i)] += REG;
        }
        for i in lo.n..dim {
            k[(i, i)] -= REG;
        }
        Kkt {
            dim,
            lo: Lowered2 { n: lo.n, p: lo.p },
            lu: k.lu(),
            k_true,
        }
    }

    /// Solves the KKT system with two rounds of iterative refinement.
    fn solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut rhs = DVector::<f64>::zeros(self.dim);
        for (i, &v) in r1.iter().enumerate() {
            rhs[i] = v;
        }
        for (i, &v) in r2.iter().enumerate() {
            rhs[self.lo.n + i] = v;
        }
        for (i, &v) in r3.iter().enumerate() {
            rhs[self.lo.n + self.lo.p + i] = v;
        }
        let mut sol = self.lu.solve(&rhs)?;
        for _ in 0..2 {
            let resid = &rhs - &self.k_true * &sol;
            if resid.amax() < 1e-14 {
                break;
            }
            if let Some(corr) = self.lu.solve(&resid) {
                sol += corr;
            } else {
                break;
            }
        }
        let x = sol.as_slice()[..self.lo.n].to_vec();
        let y = sol.as_slice()[self.lo.n..self.lo.n + self.lo.p].to_vec();
        let z = sol.as_slice()[self.lo.n + self.lo.p..].to_vec();
        Some((x, y, z))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

fn mat_t_vec(m: &[Vec<f64>], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (row, &yi) in m.iter().zip(y) {
        for (j, &v) in row.iter().enumerate() {
            out[j] += v * yi;
        }
    }
    out
}

pub(super) fn solve_socp(prog: &ConicProgram, tol: &Tolerances) -> SolverResult {
    let lo = lower(prog);
    let cones = Cones {
        orthant: lo.cones.orthant,
        socs: lo.cones.socs.clone(),
    };
    let deg = cones.degree();
    let feastol = tol.feas_tol.max(1e-10);
    let abstol = tol.opt_tol.max(1e-10);
    let reltol = tol.opt_tol.max(1e-10);

    let fail = |status: SolveStatus, x: Vec<f64>, iters: usize| SolverResult {
        status,
        objective: f64::NAN,
        residuals: Residuals {
            primal: f64::NAN,
            dual: f64::NAN,
            gap: f64::NAN,
        },
        x,
        iterations: iters,
    };

    // ---- initialization: two solves with W = I, then shift into the cone
    let e = cones.identity();
    let unit = Scaling {
        orthant_w: vec![1.0; cones.orthant],
        socs: cones
            .socs
            .iter()
            .map(|&d| {
                let mut wbar = vec![0.0; d];
                wbar[0] = 1.0;
                let mut u = vec![0.0; d];
                u[0] = 1.0;
                SocScaling {
                    eta: 1.0,
                    wbar,
                    u,
                }
            })
            .collect(),
    };
    let kkt0 = Kkt::factor(&lo, &unit);
    let zeros_n = vec![0.0; lo.n];
    let zeros_p = vec![0.0; lo.p];
    let zeros_m = vec![0.0; lo.m];
    let Some((x0, _, zt)) = kkt0.solve(&zeros_n, &lo.b, &lo.h) else {
        return fail(SolveStatus::NumericalError, vec![0.0; lo.n], 0);
    };
    let neg_c: Vec<f64> = lo.c.iter().map(|v| -v).collect();
    let Some((_, y0, zd)) = kkt0.solve(&neg_c, &zeros_p, &zeros_m) else {
        return fail(SolveStatus::NumericalError, vec![0.0; lo.n], 0);
    };
    // s candidate is -zt (third block row gives G x - z = h)
    let shift_into_cone = |v: Vec<f64>| -> Vec<f64> {
        // distance outside the cone along e
        let mut alpha = f64::NEG_INFINITY;
        for i in 0..cones.orthant {
            alpha = alpha.max(-v[i]);
        }
        let mut off = cones.orthant;
        for &d in &cones.socs {
            let nrm = dot(&v[off + 1..off + d], &v[off + 1..off + d]).sqrt();
            alpha = alpha.max(nrm - v[off]);
            off += d;
        }
        if alpha < 0.0 {
            v
        } else {
            v.iter()
                .zip(&e)
                .map(|(&vi, &ei)| vi + (1.0 + alpha) * ei)
                .collect()
        }
    };
    let mut s = shift_into_cone(zt.iter().map(|v| -v).collect());
    let mut z = shift_into_cone(zd);
    let mut x = x0;
    let mut y = y0;
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let norm_b = inf_norm(&lo.b).max(inf_norm(&lo.h)).max(1.0);
    let norm_c = inf_norm(&lo.c).max(1.0);

    let mut best_x = vec![0.0; lo.n];
    // measures of the latest iterate, for endgame acceptance
    let mut last_measures = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0f64);
    for iter in 0..MAX_ITER {
        // residuals of the homogeneous model
        let aty = mat_t_vec(&lo.a, &y, lo.n);
        let gtz = mat_t_vec(&lo.g, &z, lo.n);
        let e1: Vec<f64> = (0..lo.n)
            .map(|j| aty[j] + gtz[j] + lo.c[j] * tau)
            .collect();
        let ax = matvec(&lo.a, &x);
        let e2: Vec<f64> = (0..lo.p).map(|i| ax[i] - lo.b[i] * tau).collect();
        let gx = matvec(&lo.g, &x);
        let e3: Vec<f64> = (0..lo.m).map(|i| gx[i] + s[i] - lo.h[i] * tau).collect();
        let e4 = dot(&lo.c, &x) + dot(&lo.b, &y) + dot(&lo.h, &z) + kappa;
        let mu = (dot(&s, &z) + tau * kappa) / (deg + 1.0);

        // convergence in the de-homogenized variables
        let pres = inf_norm(&e2).max(inf_norm(&e3)) / tau / norm_b;
        let dres = inf_norm(&e1) / tau / norm_c;
        let gap = dot(&s, &z) / (tau * tau);
        let pobj = dot(&lo.c, &x) / tau;
        last_measures = (pres, dres, gap, pobj);
        if pres <= feastol && dres <= feastol && (gap <= abstol || gap <= reltol * pobj.abs().max(1.0))
        {
            let xhat: Vec<f64> = x.iter().map(|v| v / tau).collect();
            let objective = dot(&lo.c, &xhat);
            return SolverResult {
                status: SolveStatus::Optimal,
                x: xhat,
                objective,
                residuals: Residuals {
                    primal: pres,
                    dual: dres,
                    gap,
                },
                iterations: iter,
            };
        }
        // primal infeasibility certificate: A'y + G'z = 0, b'y + h'z < 0, z in K*
        let hbty = dot(&lo.b, &y) + dot(&lo.h, &z);
        if hbty < -1e-12 {
            let certres = inf_norm(&{
                let mut v = aty.clone();
                for (vj, gz) in v.iter_mut().zip(&gtz) {
                    *vj += gz;
                }
                v
            });
            if certres <= feastol * (-hbty) * norm_c {
                return fail(
                    SolveStatus::Infeasible,
                    x.iter().map(|v| v / tau.max(1e-30)).collect(),
                    iter,
                );
            }
        }
        // dual infeasibility (primal unbounded ray)
        let ctx = dot(&lo.c, &x);
        if ctx < -1e-12 {
            let ray_res = inf_norm(&ax).max(inf_norm(
                &gx.iter().zip(&s).map(|(a, b)| a + b).collect::<Vec<f64>>(),
            ));
            if ray_res <= feastol * (-ctx) * norm_b {
                let ray: Vec<f64> = x.iter().map(|v| v / (-ctx)).collect();
                return SolverResult {
                    status: SolveStatus::Unbounded,
                    x: ray,
                    objective: f64::NEG_INFINITY,
                    residuals: Residuals {
                        primal: 0.0,
                        dual: 0.0,
                        gap: 0.0,
                    },
                    iterations: iter,
                };
            }
        }

        best_x = x.iter().map(|v| v / tau).collect();
        // when the scaling or step collapses near the solution, accept the
        // iterate at mildly relaxed tolerances; the caller re-verifies primal
        // feasibility against the original program
        let accept_near = |measures: (f64, f64, f64, f64), xhat: &[f64], iters: usize| {
            let (pres, dres, gap, pobj) = measures;
            if pres <= 10.0 * feastol
                && dres <= 10.0 * feastol
                && (gap <= 10.0 * abstol || gap <= 10.0 * reltol * pobj.abs().max(1.0))
            {
                Some(SolverResult {
                    status: SolveStatus::Optimal,
                    x: xhat.to_vec(),
                    objective: pobj,
                    residuals: Residuals {
                        primal: pres,
                        dual: dres,
                        gap,
                    },
                    iterations: iters,
                })
            } else {
                None
            }
        };

        let Some(scaling) = Scaling::compute(&cones, &s, &z) else {
            if let Some(r) = accept_near(last_measures, &best_x, iter) {
                return r;
            }
            return fail(SolveStatus::NumericalError, best_x, iter);
        };
        let lambda = scaling.apply_w(&cones, &z);
        let kkt = Kkt::factor(&lo, &scaling);

        let Some((dx1, dy1, dz1)) = kkt.solve(&neg_c, &lo.b, &lo.h) else {
            if let Some(r) = accept_near(last_measures, &best_x, iter) {
                return r;
            }
            return fail(SolveStatus::NumericalError, best_x, iter);
        };
        let denom_base = dot(&lo.c, &dx1) + dot(&lo.b, &dy1) + dot(&lo.h, &dz1) - kappa / tau;

        // one direction from residual weights (gamma) and complementarity targets
        let take_step = |gamma: f64,
                             ds_target: &[f64],
                             dkappa_target: f64|
         -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> {
            let dtilde = cones.jordan_solve(&lambda, ds_target);
            let w_dtilde = scaling.apply_w(&cones, &dtilde);
            let r1: Vec<f64> = e1.iter().map(|v| -gamma * v).collect();
            let r2: Vec<f64> = e2.iter().map(|v| -gamma * v).collect();
            let r3: Vec<f64> = (0..lo.m).map(|i| -gamma * e3[i] - w_dtilde[i]).collect();
            let (dx0, dy0, dz0) = kkt.solve(&r1, &r2, &r3)?;
            let num = -gamma * e4
                - dot(&lo.c, &dx0)
                - dot(&lo.b, &dy0)
                - dot(&lo.h, &dz0)
                - dkappa_target / tau;
            if denom_base.abs() < 1e-300 {
                return None;
            }
            let dtau = num / denom_base;
            let dx: Vec<f64> = (0..lo.n).map(|j| dx0[j] + dtau * dx1[j]).collect();
            let dy: Vec<f64> = (0..lo.p).map(|j| dy0[j] + dtau * dy1[j]).collect();
            let dz: Vec<f64> = (0..lo.m).map(|j| dz0[j] + dtau * dz1[j]).collect();
            let w2dz = scaling.apply_w2(&cones, &dz);
            let ds: Vec<f64> = (0..lo.m).map(|i| w_dtilde[i] - w2dz[i]).collect();
            let dkappa = (dkappa_target - kappa * dtau) / tau;
            Some((dx, dy, dz, ds, dtau, dkappa))
        };

        // affine (predictor) direction
        let lam_lam = cones.jordan_prod(&lambda, &lambda);
        let ds_aff_target: Vec<f64> = lam_lam.iter().map(|v| -v).collect();
        let Some((_, _, dz_a, ds_a, dtau_a, dkappa_a)) =
            take_step(1.0, &ds_aff_target, -tau * kappa)
        else {
            if let Some(r) = accept_near(last_measures, &best_x, iter) {
                return r;
            }
            return fail(SolveStatus::NumericalError, best_x, iter);
        };
        let mut alpha_aff = cones
            .max_step(&s, &ds_a)
            .min(cones.max_step(&z, &dz_a));
        if dtau_a < 0.0 {
            alpha_aff = alpha_aff.min(-tau / dtau_a);
        }
        if dkappa_a < 0.0 {
            alpha_aff = alpha_aff.min(-kappa / dkappa_a);
        }
        alpha_aff = alpha_aff.min(1.0);
        let mu_aff = {
            let sz: f64 = (0..lo.m)
                .map(|i| (s[i] + alpha_aff * ds_a[i]) * (z[i] + alpha_aff * dz_a[i]))
                .sum();
            (sz + (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkappa_a)) / (deg + 1.0)
        };
        let sigma = ((mu_aff / mu).powi(3)).clamp(0.0, 1.0);

        // combined (corrector) direction
        let winv_ds = scaling.apply_winv(&cones, &ds_a);
        let w_dz = scaling.apply_w(&cones, &dz_a);
        let corr = cones.jordan_prod(&winv_ds, &w_dz);
        let ds_target: Vec<f64> = (0..lo.m)
            .map(|i| sigma * mu * e[i] - lam_lam[i] - corr[i])
            .collect();
        let dkappa_target = sigma * mu - tau * kappa - dtau_a * dkappa_a;
        let Some((dx, dy, dz, ds, dtau, dkappa)) =
            take_step(1.0 - sigma, &ds_target, dkappa_target)
        else {
            if let Some(r) = accept_near(last_measures, &best_x, iter) {
                return r;
            }
            return fail(SolveStatus::NumericalError, best_x, iter);
        };
        let mut alpha = cones.max_step(&s, &ds).min(cones.max_step(&z, &dz));
        if dtau < 0.0 {
            alpha = alpha.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            alpha = alpha.min(-kappa / dkappa);
        }
        alpha = (0.99 * alpha).min(1.0);
        if !alpha.is_finite() || alpha < 1e-12 {
            if let Some(r) = accept_near(last_measures, &best_x, iter) {
                return r;
            }
            return fail(SolveStatus::NumericalError, best_x, iter);
        }

        for (v, d) in x.iter_mut().zip(&dx) {
            *v += alpha * d;
        }
        for (v, d) in y.iter_mut().zip(&dy) {
            *v += alpha * d;
        }
        for (v, d) in z.iter_mut().zip(&dz) {
            *v += alpha * d;
        }
        for (v, d) in s.iter_mut().zip(&ds) {
            *v += alpha * d;
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }
    let (pres, dres, gap, pobj) = last_measures;
    if pres <= 10.0 * feastol
        && dres <= 10.0 * feastol
        && (gap <= 10.0 * abstol || gap <= 10.0 * reltol * pobj.abs().max(1.0))
    {
        return SolverResult {
            status: SolveStatus::Optimal,
            x: best_x,
            objective: pobj,
            residuals: Residuals {
                primal: pres,
                dual: dres,
                gap,
            },
            iterations: MAX_ITER,
        };
    }
    fail(SolveStatus::IterationLimit, best_x, MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn nt_scaling_property() {
        // W^2 z = s and W z = W^{-1} s on random interior points
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let cones = Cones {
            orthant: 3,
            socs: vec![3, 4],
        };
        for _ in 0..50 {
            let total = cones.total();
            let mut s = vec![0.0; total];
            let mut z = vec![0.0; total];
            for i in 0..3 {
                s[i] = rng.gen_range(0.1..3.0);
                z[i] = rng.gen_range(0.1..3.0);
            }
            let mut off = 3;
            for &d in &cones.socs {
                for i in 1..d {
                    s[off + i] = rng.gen_range(-1.0..1.0);
                    z[off + i] = rng.gen_range(-1.0..1.0);
                }
                let ns = dot(&s[off + 1..off + d], &s[off + 1..off + d]).sqrt();
                let nz = dot(&z[off + 1..off + d], &z[off + 1..off + d]).sqrt();
                s[off] = ns + rng.gen_range(0.1..2.0);
                z[off] = nz + rng.gen_range(0.1..2.0);
                off += d;
            }
            let sc = Scaling::compute(&cones, &s, &z).unwrap();
            let w2z = sc.apply_w2(&cones, &z);
            for i in 0..total {
                assert!((w2z[i] - s[i]).abs() < 1e-9, "W^2 z != s at {i}");
            }
            let wz = sc.apply_w(&cones, &z);
            let winv_s = sc.apply_winv(&cones, &s);
            for i in 0..total {
                assert!((wz[i] - winv_s[i]).abs() < 1e-9, "W z != W^-1 s at {i}");
            }
        }
    }

    #[test]
    fn lp_through_ipm_matches_simplex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..30 {
            let n = rng.gen_range(2..5);
            let mut p = ConicProgram::new(n);
            p.set_objective((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            for j in 0..n {
                p.set_bounds(j, 0.0, rng.gen_range(1.0..3.0));
            }
            for _ in 0..rng.gen_range(1..4) {
                let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                p.add_ineq(row, rng.gen_range(0.2..1.5));
            }
            let tl = Tolerances::default();
            let s = super::super::simplex::solve_lp(&p, &tl);
            let i = solve_socp(&p, &tl);
            assert_eq!(s.status, SolveStatus::Optimal, "trial {trial}");
            assert_eq!(i.status, SolveStatus::Optimal, "trial {trial}");
            assert!(
                (s.objective - i.objective).abs() < 1e-6,
                "trial {trial}: simplex {} vs ipm {}",
                s.objective,
                i.objective
            );
        }
    }

    #[test]
    fn disk_constrained_min() {
        // min x1 + x2 over the disk centered (1,0) radius 0.5:
        // optimum 1 - 0.5*sqrt(2)
        let mut p = ConicProgram::new(2);
        p.set_objective(vec![1.0, 1.0]);
        p.add_soc(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![-1.0, 0.0],
            vec![0.0, 0.0],
            0.5,
        );
        let r = solve_socp(&p, &Tolerances::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        let expect = 1.0 - 0.5 * std::f64::consts::SQRT_2;
        assert!((r.objective - expect).abs() < 1e-7, "got {}", r.objective);
    }

    #[test]
    fn infeasible_socp_detected() {
        // ||x|| <= -1 is empty (rhs forced negative by bounds)
        let mut p = ConicProgram::new(1);
        p.set_objective(vec![1.0]);
        p.set_bounds(0, -10.0, 10.0);
        // ||(x)|| <= -1
        p.add_soc(vec![vec![1.0]], vec![0.0], vec![0.0], -1.0);
        let r = solve_socp(&p, &Tolerances::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_socp_detected() {
        // min -x s.t. ||0|| <= x  (x >= 0 via cone), no upper bound
        let mut p = ConicProgram::new(1);
        p.set_objective(vec![-1.0]);
        p.add_soc(Vec::new(), Vec::new(), vec![1.0], 0.0);
        let r = solve_socp(&p, &Tolerances::default());
        assert_eq!(r.status, SolveStatus::Unbounded);
    }
}
