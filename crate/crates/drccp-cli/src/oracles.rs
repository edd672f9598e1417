//! Builtin black-box constraint oracles addressable by id from problem files.
//!
//! These exist for the oracle code paths (grid-based certification, the
//! subgradient checker): external plugins are out of scope, so the registry
//! is a fixed set of analytic functions.

use drccp::constraints::{ConstraintOracle, Curvature};
use std::sync::Arc;

/// `F(x,ξ) = |ξ| − x`, convex in ξ, Lipschitz constant 1 (n = m = 1).
struct AbsOneDim;

impl ConstraintOracle for AbsOneDim {
    fn x_dim(&self) -> usize {
        1
    }
    fn xi_dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        xi[0].abs() - x[0]
    }
    fn subgrad_x(&self, _x: &[f64], _xi: &[f64]) -> Vec<f64> {
        vec![-1.0]
    }
    fn grad_xi(&self, _x: &[f64], xi: &[f64]) -> Vec<f64> {
        vec![if xi[0] >= 0.0 { 1.0 } else { -1.0 }]
    }
    fn curvature_in_xi(&self) -> Curvature {
        Curvature::Convex
    }
    fn lipschitz_xi(&self) -> f64 {
        1.0
    }
}

/// `F(x,ξ) = ‖ξ‖² − x₁ − 0.5 x₂`, convex in ξ (n = m = 2).
///
/// The declared Lipschitz constant 20 presumes realizations with
/// `‖ξ‖∞ ≤ 5`; pair it with a support inside that window.
struct QuadTwoDim;

impl ConstraintOracle for QuadTwoDim {
    fn x_dim(&self) -> usize {
        2
    }
    fn xi_dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        xi[0] * xi[0] + xi[1] * xi[1] - x[0] - 0.5 * x[1]
    }
    fn subgrad_x(&self, _x: &[f64], _xi: &[f64]) -> Vec<f64> {
        vec![-1.0, -0.5]
    }
    fn grad_xi(&self, _x: &[f64], xi: &[f64]) -> Vec<f64> {
        vec![2.0 * xi[0], 2.0 * xi[1]]
    }
    fn curvature_in_xi(&self) -> Curvature {
        Curvature::Convex
    }
    fn lipschitz_xi(&self) -> f64 {
        20.0
    }
}

pub fn lookup(id: &str) -> Option<Arc<dyn ConstraintOracle>> {
    match id {
        "abs-1d" => Some(Arc::new(AbsOneDim)),
        "quad-2d" => Some(Arc::new(QuadTwoDim)),
        _ => None,
    }
}

pub fn known_ids() -> &'static [&'static str] {
    &["abs-1d", "quad-2d"]
}
