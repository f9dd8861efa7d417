//! Solver-agnostic linear / mixed-integer model.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SolverError;

/// Index of a variable inside a [`LinearModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a constraint inside a [`LinearModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: ObjSense,
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

/// A linear program, optionally with integrality restrictions.
///
/// Variable and constraint names are unique; every constraint only refers to
/// variables of the same model.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    name: String,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective: Objective,
    var_index: HashMap<String, VarId>,
    row_index: HashMap<String, RowId>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>, sense: ObjSense) -> Self {
        LinearModel {
            name: name.into(),
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Objective { sense, terms: Vec::new(), constant: 0.0 },
            var_index: HashMap::new(),
            row_index: HashMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integer: bool,
    ) -> Result<VarId, SolverError> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(SolverError::InvalidBounds { name, lower, upper });
        }
        if self.var_index.contains_key(&name) {
            return Err(SolverError::DuplicateName(name));
        }
        let id = VarId(self.vars.len());
        self.var_index.insert(name.clone(), id);
        self.vars.push(Variable { name, lower, upper, integer });
        Ok(id)
    }

    /// Continuous variable in `[lower, upper]`.
    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, SolverError> {
        self.add_var(name, lower, upper, false)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarId, SolverError> {
        self.add_var(name, 0.0, 1.0, true)
    }

    /// Adds a constraint. Repeated variables in `terms` are merged and zero
    /// coefficients dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> Result<RowId, SolverError> {
        let name = name.into();
        if self.row_index.contains_key(&name) {
            return Err(SolverError::DuplicateName(name));
        }
        let terms = self.normalize(terms)?;
        let id = RowId(self.rows.len());
        self.row_index.insert(name.clone(), id);
        self.rows.push(Constraint { name, terms, sense, rhs });
        Ok(id)
    }

    pub fn set_objective(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        constant: f64,
    ) -> Result<(), SolverError> {
        self.objective.terms = self.normalize(terms)?;
        self.objective.constant = constant;
        Ok(())
    }

    /// Adds `coef * var` to the objective.
    pub fn add_objective_term(&mut self, var: VarId, coef: f64) -> Result<(), SolverError> {
        let mut terms = std::mem::take(&mut self.objective.terms);
        terms.push((var, coef));
        self.objective.terms = self.normalize(terms)?;
        Ok(())
    }

    pub fn set_objective_constant(&mut self, constant: f64) {
        self.objective.constant = constant;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), SolverError> {
        let v = self.vars.get_mut(var.0).ok_or(SolverError::UnknownVariable(var.0))?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(SolverError::InvalidBounds { name: v.name.clone(), lower, upper });
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) -> Result<(), SolverError> {
        let r = self.rows.get_mut(row.0).ok_or(SolverError::UnknownRow(row.0))?;
        r.rhs = rhs;
        Ok(())
    }

    pub fn set_sense(&mut self, row: RowId, sense: RowSense) -> Result<(), SolverError> {
        let r = self.rows.get_mut(row.0).ok_or(SolverError::UnknownRow(row.0))?;
        r.sense = sense;
        Ok(())
    }

    fn normalize(
        &self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
    ) -> Result<Vec<(VarId, f64)>, SolverError> {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        let mut slot: HashMap<VarId, usize> = HashMap::new();
        for (v, c) in terms {
            if v.0 >= self.vars.len() {
                return Err(SolverError::UnknownVariable(v.0));
            }
            if !c.is_finite() {
                return Err(SolverError::NonFiniteCoefficient(self.vars[v.0].name.clone()));
            }
            match slot.get(&v) {
                Some(&k) => merged[k].1 += c,
                None => {
                    slot.insert(v, merged.len());
                    merged.push((v, c));
                }
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Ok(merged)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn row(&self, id: RowId) -> &Constraint {
        &self.rows[id.0]
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn row_id(&self, name: &str) -> Option<RowId> {
        self.row_index.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    /// Objective value of an assignment (indexed like `vars()`).
    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective.constant
            + self.objective.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Largest violation of any bound, row or integrality restriction.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.integer {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|&(v, c)| c * values[v.0]).sum();
            let viol = match r.sense {
                RowSense::Le => lhs - r.rhs,
                RowSense::Ge => r.rhs - lhs,
                RowSense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut m = LinearModel::new("m", ObjSense::Minimize);
        m.continuous("x", 0.0, 1.0).unwrap();
        assert!(matches!(m.continuous("x", 0.0, 1.0), Err(SolverError::DuplicateName(_))));
        let x = m.var_id("x").unwrap();
        m.add_row("c", [(x, 1.0)], RowSense::Le, 1.0).unwrap();
        assert!(m.add_row("c", [(x, 1.0)], RowSense::Le, 1.0).is_err());
    }

    #[test]
    fn bounds_must_be_ordered() {
        let mut m = LinearModel::new("m", ObjSense::Minimize);
        assert!(m.continuous("x", 1.0, 0.0).is_err());
    }

    #[test]
    fn terms_are_merged() {
        let mut m = LinearModel::new("m", ObjSense::Minimize);
        let x = m.continuous("x", 0.0, 1.0).unwrap();
        let y = m.continuous("y", 0.0, 1.0).unwrap();
        let r = m.add_row("c", [(x, 1.0), (y, 2.0), (x, 3.0), (y, -2.0)], RowSense::Ge, 0.0).unwrap();
        assert_eq!(m.row(r).terms, vec![(x, 4.0)]);
    }

    #[test]
    fn foreign_variable_rejected() {
        let mut m = LinearModel::new("m", ObjSense::Minimize);
        assert!(matches!(
            m.add_row("c", [(VarId(3), 1.0)], RowSense::Ge, 0.0),
            Err(SolverError::UnknownVariable(3))
        ));
    }
}
