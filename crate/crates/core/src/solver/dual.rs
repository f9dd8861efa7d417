//! Automatic LP dualization.
//!
//! A minimization LP
//!
//! ```text
//! min c·x + c0   s.t.  a_r·x {>=,<=,=} b_r,   l <= x <= u
//! ```
//!
//! is turned into `max Σ b_r y_r + c0` with one dual variable per row
//! (`y >= 0` for `>=`, `y <= 0` for `<=`, free for `=`) and one dual row per
//! primal column (`<=` for `x >= 0`, `>=` for `x <= 0`, `=` for free columns).
//! Finite bounds that do not fit one of those three sign patterns become
//! explicit bound rows before dualizing.

use std::collections::HashMap;

use super::{LinearModel, ObjSense, RowSense, SolverError, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColSign {
    NonNeg,
    NonPos,
    Free,
}

/// Dual of a minimization LP together with the primal↔dual bookkeeping.
#[derive(Clone, Debug)]
pub struct DualModel {
    pub model: LinearModel,
    /// Primal row name → dual variable (bound rows use `lb:<var>` / `ub:<var>`).
    pub dual_of_row: HashMap<String, VarId>,
    /// Primal row name → its coefficient in the dual objective (the primal RHS).
    pub rhs_coefficient: HashMap<String, f64>,
    /// Primal variable name → dual constraint name.
    pub row_of_column: HashMap<String, String>,
}

impl DualModel {
    pub fn dual_var(&self, primal_row: &str) -> Option<VarId> {
        self.dual_of_row.get(primal_row).copied()
    }
}

pub fn dualize(primal: &LinearModel) -> Result<DualModel, SolverError> {
    if primal.is_mip() {
        return Err(SolverError::IntegralityPresent(primal.name().to_string()));
    }
    if primal.objective().sense != ObjSense::Minimize {
        return Err(SolverError::Backend(format!(
            "dualize expects a minimization LP, `{}` maximizes",
            primal.name()
        )));
    }

    // Gather rows: (name, terms, sense, rhs), including implicit bound rows.
    let mut rows: Vec<(String, Vec<(VarId, f64)>, RowSense, f64)> = primal
        .rows()
        .iter()
        .map(|r| (r.name.clone(), r.terms.clone(), r.sense, r.rhs))
        .collect();
    let mut signs = Vec::with_capacity(primal.num_vars());
    for (k, v) in primal.vars().iter().enumerate() {
        let id = VarId(k);
        let sign = if v.lower == 0.0 {
            ColSign::NonNeg
        } else if v.upper == 0.0 && v.lower == f64::NEG_INFINITY {
            ColSign::NonPos
        } else {
            ColSign::Free
        };
        if sign == ColSign::Free && v.lower.is_finite() {
            rows.push((format!("lb:{}", v.name), vec![(id, 1.0)], RowSense::Ge, v.lower));
        }
        if sign != ColSign::NonPos && v.upper.is_finite() {
            rows.push((format!("ub:{}", v.name), vec![(id, 1.0)], RowSense::Le, v.upper));
        }
        signs.push(sign);
    }

    let mut dual = LinearModel::new(format!("dual_{}", primal.name()), ObjSense::Maximize);
    let mut dual_of_row = HashMap::with_capacity(rows.len());
    let mut rhs_coefficient = HashMap::with_capacity(rows.len());
    let mut columns: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); primal.num_vars()];
    let mut obj = Vec::with_capacity(rows.len());
    for (name, terms, sense, rhs) in &rows {
        let (lo, hi) = match sense {
            RowSense::Ge => (0.0, f64::INFINITY),
            RowSense::Le => (f64::NEG_INFINITY, 0.0),
            RowSense::Eq => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let y = dual.continuous(format!("y[{name}]"), lo, hi)?;
        for &(x, a) in terms {
            columns[x.0].push((y, a));
        }
        obj.push((y, *rhs));
        dual_of_row.insert(name.clone(), y);
        rhs_coefficient.insert(name.clone(), *rhs);
    }
    dual.set_objective(obj, primal.objective().constant)?;

    let mut cost = vec![0.0; primal.num_vars()];
    for &(x, c) in &primal.objective().terms {
        cost[x.0] += c;
    }
    let mut row_of_column = HashMap::with_capacity(primal.num_vars());
    for (k, v) in primal.vars().iter().enumerate() {
        let sense = match signs[k] {
            ColSign::NonNeg => RowSense::Le,
            ColSign::NonPos => RowSense::Ge,
            ColSign::Free => RowSense::Eq,
        };
        let name = format!("col[{}]", v.name);
        dual.add_row(name.clone(), columns[k].iter().copied(), sense, cost[k])?;
        row_of_column.insert(v.name.clone(), name);
    }

    Ok(DualModel { model: dual, dual_of_row, rhs_coefficient, row_of_column })
}
