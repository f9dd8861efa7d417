use crate::error::Result;
use crate::instance::{FirstStage, Instance, Matrix};
use crate::solver::{LinearModel, ObjSense, RowSense, VarId};

use super::{add_expr_row, add_recourse_copy, BinaryPoint, Binaries, Expr, RecourseCopy, Reserve, ReserveVars, VarKey, VarMap};

/// Master problem over the reservation with one recourse copy per scenario.
#[derive(Clone, Debug)]
pub struct OuterMp {
    pub model: LinearModel,
    pub map: VarMap,
    pub reserve: ReserveVars,
    /// Epigraph of the worst second-stage cost; absent in the deterministic model.
    pub eta: Option<VarId>,
    pub copies: Vec<RecourseCopy>,
}

/// Deterministic model at a single demand matrix.
pub fn build_det(inst: &Instance, lambda: &Matrix) -> Result<OuterMp> {
    let mut model = LinearModel::new("det", ObjSense::Minimize);
    let mut map = VarMap::default();
    let reserve = ReserveVars::declare(&mut model, &mut map, inst)?;
    let copy = add_recourse_copy(&mut model, &mut map, inst, 0, lambda, Reserve::Vars(&reserve), Binaries::Free)?;
    let mut obj = reserve.cost(inst);
    obj.add(&copy.cost, 1.0);
    model.set_objective(obj.terms, obj.constant)?;
    Ok(OuterMp { model, map, reserve, eta: None, copies: vec![copy] })
}

pub fn build_outer_mp(inst: &Instance, pool: &[Matrix]) -> Result<OuterMp> {
    let mut model = LinearModel::new("outer_mp", ObjSense::Minimize);
    let mut map = VarMap::default();
    let reserve = ReserveVars::declare(&mut model, &mut map, inst)?;
    let eta = map.add(&mut model, VarKey::Eta, f64::NEG_INFINITY, f64::INFINITY, false)?;
    let mut copies = Vec::with_capacity(pool.len());
    for (l, lambda) in pool.iter().enumerate() {
        let copy = add_recourse_copy(&mut model, &mut map, inst, l, lambda, Reserve::Vars(&reserve), Binaries::Free)?;
        let mut epi = Expr::var(eta);
        epi.add(&copy.cost, -1.0);
        add_expr_row(&mut model, format!("epi[{l}]"), &epi, RowSense::Ge, 0.0)?;
        copies.push(copy);
    }
    let mut obj = reserve.cost(inst);
    obj.add_var(eta, 1.0);
    model.set_objective(obj.terms, obj.constant)?;
    Ok(OuterMp { model, map, reserve, eta: Some(eta), copies })
}

/// Single-copy recourse model at a fixed reservation.
#[derive(Clone, Debug)]
pub struct RecourseModel {
    pub model: LinearModel,
    pub map: VarMap,
    pub copy: RecourseCopy,
}

/// Mixed-integer recourse at fixed reservation and demand.
pub fn build_inner_sp(inst: &Instance, fs: &FirstStage, lambda: &Matrix) -> Result<RecourseModel> {
    let mut model = LinearModel::new("inner_sp", ObjSense::Minimize);
    let mut map = VarMap::default();
    let copy = add_recourse_copy(&mut model, &mut map, inst, 0, lambda, Reserve::Fixed(fs), Binaries::Free)?;
    model.set_objective(copy.cost.terms.clone(), copy.cost.constant)?;
    Ok(RecourseModel { model, map, copy })
}

/// Continuous recourse at fixed reservation, binaries and demand.
#[derive(Clone, Debug)]
pub struct InnermostLp {
    pub model: LinearModel,
    pub map: VarMap,
    pub copy: RecourseCopy,
    /// Installation, download and storage cost of the fixed binaries.
    pub fixed_cost: f64,
}

pub fn build_innermost_lp(inst: &Instance, fs: &FirstStage, point: &BinaryPoint, lambda: &Matrix) -> Result<InnermostLp> {
    let mut model = LinearModel::new("innermost_lp", ObjSense::Minimize);
    let mut map = VarMap::default();
    let copy = add_recourse_copy(&mut model, &mut map, inst, 0, lambda, Reserve::Fixed(fs), Binaries::Fixed(point))?;
    let fixed_cost = copy.cost.constant;
    model.set_objective(copy.cost.terms.clone(), fixed_cost)?;
    Ok(InnermostLp { model, map, copy, fixed_cost })
}
