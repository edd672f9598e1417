//! Probability primitives: sample sets, finitely supported distributions,
//! Wasserstein distance between discrete distributions, and empirical CVaR.

use crate::conic::{self, ConicProgram, SolveStatus};
use serde::{Deserialize, Serialize};
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("empty input: {0}")]
    Empty(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("transport solve failed with status {0:?}")]
    TransportFailed(SolveStatus),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Feasibility slack accepted in constraint and membership checks.
    pub feas_tol: f64,
    /// Optimality / duality-gap tolerance for solves.
    pub opt_tol: f64,
    /// Separation oracle gap η.
    pub oracle_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas_tol: 1e-8,
            opt_tol: 1e-8,
            oracle_tol: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), ProbError> {
        if self.feas_tol <= 0.0 || self.opt_tol <= 0.0 || self.oracle_tol <= 0.0 {
            return Err(ProbError::InvalidValue(
                "tolerances must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Wasserstein order; only 1 and 2 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WassersteinOrder {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl WassersteinOrder {
    pub fn exponent(self) -> f64 {
        match self {
            WassersteinOrder::One => 1.0,
            WassersteinOrder::Two => 2.0,
        }
    }

    pub fn from_f64(p: f64) -> Result<Self, ProbError> {
        if p == 1.0 {
            Ok(WassersteinOrder::One)
        } else if p == 2.0 {
            Ok(WassersteinOrder::Two)
        } else {
            Err(ProbError::InvalidValue(format!(
                "order p must be 1 or 2, got {p}"
            )))
        }
    }

    /// Ground cost d(a,b)^p with the Euclidean metric.
    pub fn ground_cost(self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        match self {
            WassersteinOrder::One => d2.sqrt(),
            WassersteinOrder::Two => d2,
        }
    }
}

/// Observed realizations of the uncertainty, one vector per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSet {
    samples: Vec<Vec<f64>>,
    dim: usize,
}

impl SampleSet {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self, ProbError> {
        if samples.is_empty() {
            return Err(ProbError::Empty("sample set needs at least one sample".into()));
        }
        let dim = samples[0].len();
        if dim == 0 {
            return Err(ProbError::Empty("samples must have positive dimension".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(ProbError::DimensionMismatch(format!(
                    "sample {i} has dimension {}, expected {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(ProbError::InvalidValue(format!("sample {i} has a non-finite entry")));
            }
        }
        Ok(SampleSet { samples, dim })
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(values: &[f64]) -> Result<Self, ProbError> {
        SampleSet::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty() // never true: construction requires N >= 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    /// Reads samples from CSV: one row per sample, m columns. A first row
    /// with any non-numeric cell is treated as a header and skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ProbError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| ProbError::Parse(e.to_string()))?;
            let parsed: Result<Vec<f64>, _> = record.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(e) if i == 0 => {
                    // header row
                    let _ = e;
                }
                Err(e) => {
                    return Err(ProbError::Parse(format!("row {i}: {e}")));
                }
            }
        }
        SampleSet::new(rows)
    }

    pub fn from_csv_str(s: &str) -> Result<Self, ProbError> {
        SampleSet::from_csv_reader(s.as_bytes())
    }

    /// Reads samples from a JSON array of arrays.
    pub fn from_json_str(s: &str) -> Result<Self, ProbError> {
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(s).map_err(|e| ProbError::Parse(e.to_string()))?;
        SampleSet::new(rows)
    }
}

/// Finitely supported probability measure.
///
/// Duplicate atoms are kept as-is; [`DiscreteDistribution::merged`] collapses
/// exactly equal atoms when measure-level equality is wanted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, ProbError> {
        if atoms.is_empty() {
            return Err(ProbError::Empty("distribution needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(ProbError::DimensionMismatch(format!(
                "{} atoms vs {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        for a in &atoms {
            if a.len() != dim {
                return Err(ProbError::DimensionMismatch("atom dimensions differ".into()));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(ProbError::InvalidValue("non-finite atom entry".into()));
            }
        }
        let mut total = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(ProbError::InvalidValue(format!("negative or non-finite weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(ProbError::InvalidValue(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(DiscreteDistribution { atoms, weights })
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() // never true after construction
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Collapses exactly equal atoms, summing their weights.
    pub fn merged(&self) -> DiscreteDistribution {
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            if let Some(k) = atoms.iter().position(|b| b == a) {
                weights[k] += w;
            } else {
                atoms.push(a.clone());
                weights.push(w);
            }
        }
        DiscreteDistribution { atoms, weights }
    }

    /// Measure-level equality after merging duplicate atoms.
    pub fn eq_as_measure(&self, other: &DiscreteDistribution, tol: f64) -> bool {
        let a = self.merged();
        let b = other.merged();
        if a.len() != b.len() || a.dim() != b.dim() {
            return false;
        }
        for (atom, &w) in a.atoms.iter().zip(&a.weights) {
            match b.atoms.iter().position(|x| x == atom) {
                Some(k) if (b.weights[k] - w).abs() <= tol => {}
                _ => return false,
            }
        }
        true
    }

    pub fn from_json_str(s: &str) -> Result<Self, ProbError> {
        #[derive(Deserialize)]
        struct Raw {
            atoms: Vec<Vec<f64>>,
            weights: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| ProbError::Parse(e.to_string()))?;
        DiscreteDistribution::new(raw.atoms, raw.weights)
    }
}

/// Wasserstein ball `{ μ : W_p(μ, center) ≤ radius }` under the Euclidean metric.
#[derive(Debug, Clone)]
pub struct AmbiguityBall {
    pub center: DiscreteDistribution,
    pub radius: f64,
    pub order: WassersteinOrder,
}

impl AmbiguityBall {
    pub fn new(
        center: DiscreteDistribution,
        radius: f64,
        order: WassersteinOrder,
    ) -> Result<Self, ProbError> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(ProbError::InvalidValue(format!(
                "radius must be a nonnegative real, got {radius}"
            )));
        }
        Ok(AmbiguityBall {
            center,
            radius,
            order,
        })
    }
}

/// Uniform empirical distribution over the samples; duplicates kept as
/// separate atoms.
pub fn empirical_distribution(s: &SampleSet) -> DiscreteDistribution {
    let n = s.len() as f64;
    DiscreteDistribution {
        atoms: s.samples().to_vec(),
        weights: vec![1.0 / n; s.len()],
    }
}

/// p-Wasserstein distance between two discrete distributions, solved as a
/// transport plan LP over the joint simplex with marginal constraints.
pub fn wasserstein_distance(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    p: WassersteinOrder,
) -> Result<f64, ProbError> {
    if mu.dim() != nu.dim() {
        return Err(ProbError::DimensionMismatch(format!(
            "distributions have dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let (na, nb) = (mu.len(), nu.len());
    let mut prog = ConicProgram::new(na * nb);
    let mut cost = vec![0.0; na * nb];
    for (i, a) in mu.atoms().iter().enumerate() {
        for (j, b) in nu.atoms().iter().enumerate() {
            cost[i * nb + j] = p.ground_cost(a, b);
        }
    }
    prog.set_objective(cost);
    for j in 0..na * nb {
        prog.set_bounds(j, 0.0, f64::INFINITY);
    }
    for (i, &w) in mu.weights().iter().enumerate() {
        let mut row = vec![0.0; na * nb];
        for j in 0..nb {
            row[i * nb + j] = 1.0;
        }
        prog.add_eq(row, w);
    }
    for (j, &w) in nu.weights().iter().enumerate() {
        let mut row = vec![0.0; na * nb];
        for i in 0..na {
            row[i * nb + j] = 1.0;
        }
        prog.add_eq(row, w);
    }
    let res = conic::solve(&prog, &Tolerances::default())
        .map_err(|e| ProbError::InvalidValue(e.to_string()))?;
    if res.status != SolveStatus::Optimal {
        return Err(ProbError::TransportFailed(res.status));
    }
    let v = res.objective.max(0.0);
    Ok(match p {
        WassersteinOrder::One => v,
        WassersteinOrder::Two => v.sqrt(),
    })
}

/// Empirical CVaR at level 1−α:  inf_t [ α⁻¹·mean((zᵢ+t)₊) − t ].
///
/// The objective is convex piecewise linear in t with kinks at t = −zᵢ, so
/// the infimum is attained at one of those breakpoints; one-sided slopes at
/// the minimizer are checked rather than assumed.
pub fn empirical_cvar(values: &[f64], alpha: f64) -> Result<f64, ProbError> {
    if values.is_empty() {
        return Err(ProbError::Empty("CVaR of an empty list".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ProbError::InvalidValue(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ProbError::InvalidValue("non-finite value in CVaR input".into()));
    }
    let n = values.len() as f64;
    let objective = |t: f64| -> f64 {
        let mean_pos: f64 = values.iter().map(|&z| (z + t).max(0.0)).sum::<f64>() / n;
        mean_pos / alpha - t
    };
    let mut best_t = -values[0];
    let mut best = objective(best_t);
    for &z in &values[1..] {
        let t = -z;
        let v = objective(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    // slope just left/right of best_t: (#{z_i + t > 0})/(α n) − 1, with the
    // kink set joining on the right
    let above = values.iter().filter(|&&z| z + best_t > 1e-12).count() as f64;
    let at = values
        .iter()
        .filter(|&&z| (z + best_t).abs() <= 1e-12)
        .count() as f64;
    let left_slope = above / (alpha * n) - 1.0;
    let right_slope = (above + at) / (alpha * n) - 1.0;
    debug_assert!(
        left_slope <= 1e-9 && right_slope >= -1e-9,
        "CVaR minimizer not at a breakpoint: slopes ({left_slope}, {right_slope})"
    );
    Ok(best)
}
