//! Problem file schema, validation, and loading.
//!
//! A problem is a JSON document:
//!
//! ```json
//! {
//!   "objective": [1.0],
//!   "X": {"D": [[...]], "g": [...], "box": [[0.0, 2.0]]},
//!   "constraint": {"pieces": [{"a": [...], "A": [[...]], "d": [...], "e": 0.0}]}
//!                 or {"oracle": "<builtin id>"},
//!   "support": "free" or {"C": [[...]], "h": [...]},
//!   "samples_path": "samples.csv",
//!   "theta": 0.1, "p": 1, "alpha": 0.5, "delta": 0.0,
//!   "tolerances": {"feas_tol": 1e-8, "opt_tol": 1e-8, "oracle_tol": 1e-4},
//!   "algorithm": {"eta": 1e-4, "max_iter": 500, ...},
//!   "grid": {"points_per_dim": 201, "free_half_width": 10.0}
//! }
//! ```
//!
//! Samples load from CSV (rows of m columns, optional header) or from a JSON
//! array of arrays, resolved relative to the problem file.

use crate::oracles;
use drccp::constraints::{
    ConstraintFunction, GridConfig, PieceSpec, PolyhedralSupport, PolytopeX, SupportSpec, XSpec,
};
use drccp::cutting::AlgoParams;
use drccp::prob::{SampleSet, Tolerances, WassersteinOrder};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Error with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 4: malformed problem file or inputs.
    #[error("schema error: {0}")]
    Schema(String),
    /// Exit 5: method incompatible with the constraint class or data.
    #[error("incompatible method: {0}")]
    Incompatible(String),
    /// Exit 2: the program is infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Exit 3: solver did not converge.
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    /// Exit 1: anything else.
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 4,
            CliError::Incompatible(_) => 5,
            CliError::Infeasible(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub eta: Option<f64>,
    pub b_override: Option<f64>,
    pub sigma_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub multi_start: Option<usize>,
    pub ascent_cap: Option<usize>,
    pub grid_points_per_dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ConstraintSpec {
    Pieces { pieces: Vec<PieceSpec> },
    Oracle { oracle: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub objective: Vec<f64>,
    #[serde(rename = "X")]
    pub x: XSpec,
    pub constraint: ConstraintSpec,
    pub support: SupportSpec,
    pub samples_path: String,
    pub theta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub alpha: f64,
    #[serde(default)]
    pub delta: f64,
    pub tolerances: Option<Tolerances>,
    pub algorithm: Option<AlgorithmSpec>,
    pub grid: Option<GridConfig>,
}

fn default_p() -> f64 {
    1.0
}

/// Fully validated problem ready for dispatch.
pub struct Problem {
    pub constraint: ConstraintFunction,
    pub x_set: PolytopeX,
    pub support: PolyhedralSupport,
    pub samples: SampleSet,
    pub objective: Vec<f64>,
    pub theta: f64,
    pub p: WassersteinOrder,
    pub alpha: f64,
    pub delta: f64,
    pub tolerances: Tolerances,
    pub algo: AlgoParams,
    pub grid: GridConfig,
    pub problem_bytes: Vec<u8>,
    pub samples_bytes: Vec<u8>,
    pub problem_path: PathBuf,
    pub samples_path: PathBuf,
}

impl Problem {
    pub fn piecewise(&self) -> Option<&drccp::constraints::PiecewiseBilinearConstraint> {
        match &self.constraint {
            ConstraintFunction::Piecewise(p) => Some(p),
            ConstraintFunction::Oracle(_) => None,
        }
    }
}

pub fn load_problem(path: &Path, seed: u64) -> Result<Problem, CliError> {
    let problem_bytes = std::fs::read(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let spec: ProblemFile = serde_json::from_slice(&problem_bytes)
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;

    if spec.objective.is_empty() {
        return Err(CliError::Schema("objective vector is empty".into()));
    }
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(CliError::Schema(format!(
            "alpha must lie in (0,1), got {}",
            spec.alpha
        )));
    }
    if !(spec.theta >= 0.0) || !spec.theta.is_finite() {
        return Err(CliError::Schema(format!("theta must be >= 0, got {}", spec.theta)));
    }
    if spec.delta < 0.0 {
        return Err(CliError::Schema(format!("delta must be >= 0, got {}", spec.delta)));
    }
    let p = WassersteinOrder::from_f64(spec.p)
        .map_err(|e| CliError::Schema(e.to_string()))?;
    let tolerances = spec.tolerances.unwrap_or_default();
    tolerances
        .validate()
        .map_err(|e| CliError::Schema(e.to_string()))?;

    let n = spec.objective.len();
    let constraint = match spec.constraint.clone() {
        ConstraintSpec::Pieces { pieces } => {
            let f = drccp::constraints::pieces_from_specs(pieces)
                .map_err(|e| CliError::Schema(e.to_string()))?;
            if f.x_dim() != n {
                return Err(CliError::Schema(format!(
                    "constraint decision dimension {} vs objective length {n}",
                    f.x_dim()
                )));
            }
            ConstraintFunction::Piecewise(f)
        }
        ConstraintSpec::Oracle { oracle } => {
            let o = oracles::lookup(&oracle)
                .ok_or_else(|| {
                CliError::Schema(format!(
                    "unknown oracle id {oracle:?}; known: {}",
                    oracles::known_ids().join(", ")
                ))
            })?;
            if o.x_dim() != n {
                return Err(CliError::Schema(format!(
                    "oracle decision dimension {} vs objective length {n}",
                    o.x_dim()
                )));
            }
            ConstraintFunction::Oracle(o)
        }
    };
    let m = constraint.xi_dim();
    let x_set = spec
        .x
        .clone()
        .into_polytope(n)
        .map_err(|e| CliError::Schema(e.to_string()))?;
    let support = spec
        .support
        .clone()
        .into_support(m)
        .map_err(|e| CliError::Schema(e.to_string()))?;

    let samples_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&spec.samples_path);
    let samples_bytes = std::fs::read(&samples_path).map_err(|e| {
        CliError::Schema(format!("cannot read samples {}: {e}", samples_path.display()))
    })?;
    let text = String::from_utf8_lossy(&samples_bytes);
    let samples = if samples_path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false)
    {
        SampleSet::from_json_str(&text)
    } else {
        SampleSet::from_csv_str(&text)
    }
    .map_err(|e| CliError::Schema(format!("samples: {e}")))?;
    if samples.dim() != m {
        return Err(CliError::Schema(format!(
            "samples have dimension {}, constraint expects {m}",
            samples.dim()
        )));
    }

    let mut algo = AlgoParams {
        eta: tolerances.oracle_tol,
        seed,
        ..AlgoParams::default()
    };
    if let Some(a) = &spec.algorithm {
        if let Some(v) = a.eta {
            algo.eta = v;
        }
        algo.b_override = a.b_override;
        algo.sigma_tol = a.sigma_tol;
        if let Some(v) = a.max_iter {
            algo.max_iter = v;
        }
        if let Some(v) = a.multi_start {
            algo.multi_start = v;
        }
        if let Some(v) = a.ascent_cap {
            algo.ascent_cap = v;
        }
        if let Some(v) = a.grid_points_per_dim {
            algo.grid_points_per_dim = v;
        }
    }
    if algo.eta <= 0.0 {
        return Err(CliError::Schema("eta must be positive".into()));
    }

    Ok(Problem {
        constraint,
        x_set,
        support,
        samples,
        objective: spec.objective,
        theta: spec.theta,
        p,
        alpha: spec.alpha,
        delta: spec.delta,
        tolerances,
        algo,
        grid: spec.grid.unwrap_or_default(),
        problem_bytes,
        samples_bytes,
        problem_path: path.to_path_buf(),
        samples_path,
    })
}
