//! Data-driven distributionally robust chance-constrained programs (DRCCPs)
//! over Wasserstein ambiguity balls centered at an empirical distribution.
//!
//! The crate provides:
//!
//! - probability primitives: discrete distributions, transport-LP Wasserstein
//!   distance, empirical CVaR ([`prob`]);
//! - constraint representations with distance-to-violation and Lipschitz
//!   machinery ([`constraints`]);
//! - a solver-agnostic conic program layer with dense in-crate backends
//!   ([`conic`]);
//! - exact worst-case violation certification over the ambiguity ball
//!   ([`exact`]);
//! - conic reformulations of the CVaR approximation, its Lipschitz inner
//!   approximation, and scenario / sample-approximation baselines with
//!   feasibility-set comparison reports ([`reformulate`]);
//! - a central cutting-surface method for the semi-infinite CVaR program
//!   ([`cutting`]).

pub mod conic;
pub mod constraints;
pub mod cutting;
pub mod exact;
pub mod prob;
pub mod reformulate;

pub use prob::{
    empirical_cvar, empirical_distribution, wasserstein_distance, AmbiguityBall,
    DiscreteDistribution, SampleSet, Tolerances, WassersteinOrder,
};
