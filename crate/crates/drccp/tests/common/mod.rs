//! Shared randomized instance generation for the integration suites.
//!
//! Each integration test binary compiles this module independently, so not
//! every item is used by every binary.
#![allow(dead_code)]

use drccp::constraints::{
    lipschitz_xi_bound, Piece, PiecewiseBilinearConstraint, PolyhedralSupport, PolytopeX,
};
use drccp::prob::SampleSet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct TestInstance {
    pub f: PiecewiseBilinearConstraint,
    pub samples: SampleSet,
    pub x_set: PolytopeX,
    pub support: PolyhedralSupport,
    pub support_box: Vec<(f64, f64)>,
    pub c: Vec<f64>,
    pub theta: f64,
    pub alpha: f64,
    /// Point with F(x̄, ξ) ≤ −δ for all ξ in the support box.
    pub anchor: Vec<f64>,
    /// Robust margin δ at the anchor.
    pub margin: f64,
    /// Uniform Lipschitz bound of ξ ↦ F(x,ξ) over X.
    pub lipschitz: f64,
}

pub struct GenOptions {
    pub n_max: usize,
    pub m_max: usize,
    pub k_max: usize,
    pub samples_max: usize,
    pub compact_support: bool,
    /// Scales the random slopes (ξ- and x-coefficients).
    pub slope_scale: f64,
    /// Robust margin δ at the anchor.
    pub delta_range: (f64, f64),
    /// Support box half-width range.
    pub radius_range: (f64, f64),
    pub alpha_range: (f64, f64),
    /// Absolute θ range, or, when `theta_relative` is set, a multiplier c so
    /// θ = c · α δ / L keeps the inner approximation feasible at the anchor.
    pub theta_range: (f64, f64),
    pub theta_relative: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            n_max: 2,
            m_max: 2,
            k_max: 2,
            samples_max: 5,
            compact_support: true,
            slope_scale: 1.0,
            delta_range: (0.3, 0.8),
            radius_range: (0.8, 2.0),
            alpha_range: (0.2, 0.8),
            theta_range: (0.05, 0.4),
            theta_relative: false,
        }
    }
}

/// Max of an affine-in-ξ piece over the box corners at a fixed x.
fn piece_max_over_box(
    f: &PiecewiseBilinearConstraint,
    k: usize,
    x: &[f64],
    bounds: &[(f64, f64)],
) -> f64 {
    let grad = f.xi_gradient(k, x);
    let mut v = f.affine_part(k, x);
    for (g, &(lo, hi)) in grad.iter().zip(bounds) {
        v += if *g >= 0.0 { g * hi } else { g * lo };
    }
    v
}

/// Randomized feasible instance: the constraint is shifted so the box-center
/// anchor is robustly feasible with margin δ, which keeps every solver path
/// well posed.
pub fn random_instance(rng: &mut ChaCha8Rng, opts: &GenOptions) -> TestInstance {
    let n = rng.gen_range(1..=opts.n_max);
    let m = rng.gen_range(1..=opts.m_max);
    let k = rng.gen_range(1..=opts.k_max);
    let big_n = rng.gen_range(2..=opts.samples_max);
    let s = opts.slope_scale;

    let x_bounds: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let lo = rng.gen_range(-1.5..-0.4);
            let hi = rng.gen_range(0.4..1.5);
            (lo, hi)
        })
        .collect();
    let support_box: Vec<(f64, f64)> = (0..m)
        .map(|_| {
            let r = rng.gen_range(opts.radius_range.0..opts.radius_range.1);
            (-r, r)
        })
        .collect();

    let mut pieces = Vec::with_capacity(k);
    for _ in 0..k {
        let mut a: Vec<f64> = (0..m).map(|_| rng.gen_range(-s..s)).collect();
        // keep the ξ-gradient bounded away from zero
        if a.iter().all(|v| v.abs() < 0.3 * s) {
            a[0] = 0.6 * s * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
        let coupling: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(-0.4 * s..0.4 * s)).collect())
            .collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = rng.gen_range(-0.5..0.5);
        pieces.push(Piece { a, coupling, d, e });
    }
    let mut f = PiecewiseBilinearConstraint::new(pieces, n, m).unwrap();

    // anchor at the decision-box center; shift every piece below -δ there
    let anchor: Vec<f64> = x_bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let margin = rng.gen_range(opts.delta_range.0..opts.delta_range.1);
    let worst = (0..f.num_pieces())
        .map(|kk| piece_max_over_box(&f, kk, &anchor, &support_box))
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = worst + margin;
    let mut shifted: Vec<Piece> = f.pieces().to_vec();
    for p in &mut shifted {
        p.e -= shift;
    }
    f = PiecewiseBilinearConstraint::new(shifted, n, m).unwrap();

    let samples = SampleSet::new(
        (0..big_n)
            .map(|_| {
                support_box
                    .iter()
                    .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                    .collect()
            })
            .collect(),
    )
    .unwrap();

    let x_set = PolytopeX::from_box(x_bounds).unwrap();
    let support = if opts.compact_support {
        PolyhedralSupport::box_support(support_box.clone()).unwrap()
    } else {
        PolyhedralSupport::free(m)
    };
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 0.2 {
        c[0] = 1.0;
    } else {
        for v in &mut c {
            *v /= norm;
        }
    }
    let alpha = rng.gen_range(opts.alpha_range.0..opts.alpha_range.1);
    let lipschitz = lipschitz_xi_bound(&f, &x_set).unwrap();
    let theta = if opts.theta_relative {
        // θ L < α δ keeps the anchor inside the inner approximation
        rng.gen_range(opts.theta_range.0..opts.theta_range.1) * alpha * margin / lipschitz
    } else {
        rng.gen_range(opts.theta_range.0..opts.theta_range.1)
    };
    TestInstance {
        f,
        samples,
        x_set,
        support,
        support_box,
        c,
        theta,
        alpha,
        anchor,
        margin,
        lipschitz,
    }
}

pub fn corner_points(bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for &(lo, hi) in bounds {
        let mut next = Vec::with_capacity(pts.len() * 2);
        for p in &pts {
            let mut a = p.clone();
            a.push(lo);
            next.push(a);
            let mut b = p.clone();
            b.push(hi);
            next.push(b);
        }
        pts = next;
    }
    pts
}

/// The running example: F(x,ξ) = ξ − x, samples {0, 1}, X = [0, 2],
/// Ξ = [−1, 3], θ = 0.1, α = 0.5.
pub fn toy_instance() -> TestInstance {
    let f =
        PiecewiseBilinearConstraint::single(vec![1.0], vec![vec![0.0]], vec![-1.0], 0.0).unwrap();
    TestInstance {
        f,
        samples: SampleSet::from_scalars(&[0.0, 1.0]).unwrap(),
        x_set: PolytopeX::from_box(vec![(0.0, 2.0)]).unwrap(),
        support: PolyhedralSupport::box_support(vec![(-1.0, 3.0)]).unwrap(),
        support_box: vec![(-1.0, 3.0)],
        c: vec![1.0],
        theta: 0.1,
        alpha: 0.5,
        anchor: vec![2.0],
        margin: 1.0,
        lipschitz: 1.0,
    }
}

pub fn sample_box(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| rng.gen_range(lo..=hi))
        .collect()
}
