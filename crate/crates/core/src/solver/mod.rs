//! Linear/mixed-integer model representation, the HiGHS backend, LP/MPS
//! export and automatic LP dualization.

mod dual;
mod export;
mod highs_backend;
mod model;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dual::{dualize, DualModel};
pub use export::{export_model, solve_exported, ExportFormat};
pub use model::{Constraint, LinearModel, ObjSense, Objective, RowId, RowSense, VarId, Variable};

/// Absolute tolerance used when checking bounds, rows and integrality.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("unknown row index {0}")]
    UnknownRow(usize),
    #[error("invalid bounds [{lower}, {upper}] for `{name}`")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient on `{0}`")]
    NonFiniteCoefficient(String),
    #[error("model `{0}` has integer variables and cannot be dualized")]
    IntegralityPresent(String),
    #[error("name collision after sanitization: `{0}` and `{1}` both map to `{2}`")]
    NameCollision(String, String, String),
    #[error("solver backend failure: {0}")]
    Backend(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Solver parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Relative MIP gap at which the backend may stop.
    pub rel_gap: f64,
    /// Wall-clock limit in seconds (`None` = unlimited).
    pub time_limit: Option<f64>,
    pub seed: u32,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { rel_gap: 1e-9, time_limit: None, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    GapLimit,
    TimeLimit,
}

impl SolveStatus {
    /// Whether the result carries a usable primal point.
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit | SolveStatus::TimeLimit)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective including the model's constant term.
    pub objective: f64,
    /// Values indexed like [`LinearModel::vars`].
    pub values: Vec<f64>,
    /// Row duals indexed like [`LinearModel::rows`]; only for pure LPs.
    pub duals: Option<Vec<f64>>,
    /// Proven relative MIP gap (0 for LPs).
    pub mip_gap: f64,
    /// Proven bound on the optimum: a lower bound when minimizing, an upper
    /// bound when maximizing. Equals `objective` for LPs.
    pub bound: f64,
}

impl SolveResult {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn values_by_name(&self, model: &LinearModel) -> HashMap<String, f64> {
        model.vars().iter().zip(&self.values).map(|(v, &x)| (v.name.clone(), x)).collect()
    }

    pub fn duals_by_name(&self, model: &LinearModel) -> Option<HashMap<String, f64>> {
        let duals = self.duals.as_ref()?;
        Some(model.rows().iter().zip(duals).map(|(r, &y)| (r.name.clone(), y)).collect())
    }
}

/// Solves `model` with the pinned backend (HiGHS).
pub fn solve(model: &LinearModel, params: &SolveParams) -> Result<SolveResult, SolverError> {
    highs_backend::solve(model, params)
}
