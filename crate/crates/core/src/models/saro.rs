//! Static baseline: placement and reservation fixed over the horizon,
//! allocation constant over time, no spot trading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FirstStage, Instance, Matrix, RecoursePlan};
use crate::solver::{LinearModel, ObjSense, RowSense, VarId};

use super::{add_expr_row, Expr, VarKey, VarMap};

/// First-stage decision of the static baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaroPlan {
    /// `[j]` placement, constant over the horizon.
    pub z: Vec<f64>,
    /// `[j]` edge reservation, constant over the horizon.
    pub s: Vec<f64>,
    pub s0: f64,
}

impl SaroPlan {
    pub fn first_stage(&self, horizon: usize) -> FirstStage {
        FirstStage { edge: self.s.iter().map(|&s| vec![s; horizon]).collect(), cloud: vec![self.s0; horizon] }
    }

    /// Reservation plus placement cost.
    pub fn cost(&self, inst: &Instance) -> f64 {
        let c = &inst.costs;
        let mut total = 0.0;
        for t in 0..inst.horizon {
            total += c.slot_length * c.reserve_price_cloud[t] * self.s0;
            for j in 0..inst.en_count() {
                total += c.slot_length * c.reserve_price_edge[j][t] * self.s[j] + c.storage_cost[j][t] * self.z[j];
            }
        }
        for j in 0..inst.en_count() {
            total += setup_cost(inst, j) * self.z[j];
        }
        total
    }

    /// Recourse plan with a time-constant allocation.
    pub fn recourse_plan(&self, inst: &Instance, x: &Matrix, x0: &[f64]) -> RecoursePlan {
        let (i_n, j_n, t_n) = (inst.ap_count(), inst.en_count(), inst.horizon);
        let mut plan = RecoursePlan::zeros(i_n, j_n, t_n);
        for j in 0..j_n {
            for t in 0..t_n {
                plan.placement[j][t] = self.z[j];
            }
            if t_n > 0 {
                plan.download_cloud[j][0] = self.z[j] * (1.0 - inst.initial(j));
            }
        }
        plan.tighten_startup(&inst.costs.initial_placement);
        for i in 0..i_n {
            for t in 0..t_n {
                plan.alloc_cloud[i][t] = x0[i];
                for j in 0..j_n {
                    plan.alloc[i][j][t] = x[i][j];
                }
            }
        }
        plan
    }
}

/// Installation plus cloud download in the first period, charged once.
fn setup_cost(inst: &Instance, j: usize) -> f64 {
    let c = &inst.costs;
    if inst.horizon == 0 {
        return 0.0;
    }
    (c.install_cost[j][0] + c.download_cloud[j][0]) * (1.0 - inst.initial(j))
}

/// Allocation variables of one scenario copy.
#[derive(Clone, Debug)]
pub struct SaroCopy {
    pub x: Vec<Vec<VarId>>,
    pub x0: Vec<VarId>,
    pub cost: Expr,
}

#[derive(Clone, Debug)]
pub struct SaroMaster {
    pub model: LinearModel,
    pub map: VarMap,
    pub z: Vec<VarId>,
    pub s: Vec<VarId>,
    pub s0: VarId,
    pub eta: VarId,
    pub copies: Vec<SaroCopy>,
}

impl SaroMaster {
    pub fn extract(&self, values: &[f64]) -> SaroPlan {
        SaroPlan {
            z: self.z.iter().map(|v| values[v.0].round().clamp(0.0, 1.0)).collect(),
            s: self.s.iter().map(|v| values[v.0].max(0.0)).collect(),
            s0: values[self.s0.0].max(0.0),
        }
    }
}

/// Time-constant routing cost of one request stream over the horizon.
fn horizon_cost(inst: &Instance, per_period: f64) -> f64 {
    per_period * inst.horizon as f64
}

fn check_demand(inst: &Instance, lambda: &Matrix) -> Result<()> {
    if lambda.len() != inst.ap_count() || lambda.iter().any(|r| r.len() != inst.horizon) {
        return Err(Error::Dimension(format!("demand must be {}x{}", inst.ap_count(), inst.horizon)));
    }
    Ok(())
}

/// Master over the static first stage with one hard recourse copy per scenario.
pub fn build_saro_master(inst: &Instance, pool: &[Matrix]) -> Result<SaroMaster> {
    let (i_n, j_n, t_n) = (inst.ap_count(), inst.en_count(), inst.horizon);
    let c = &inst.costs;
    let w = c.resource_per_request;
    let mut model = LinearModel::new("saro_master", ObjSense::Minimize);
    let mut map = VarMap::default();
    let mut obj = Expr::default();
    let mut z = Vec::with_capacity(j_n);
    let mut s = Vec::with_capacity(j_n);
    for j in 0..j_n {
        let zj = map.add(&mut model, VarKey::StaticPlace { j }, 0.0, 1.0, true)?;
        let sj = map.add(&mut model, VarKey::StaticReserve { j }, 0.0, c.capacity[j], false)?;
        model.add_row(format!("scap[{j}]"), [(sj, 1.0), (zj, -c.capacity[j])], RowSense::Le, 0.0)?;
        let mut zc = setup_cost(inst, j);
        let mut sc = 0.0;
        for t in 0..t_n {
            zc += c.storage_cost[j][t];
            sc += c.slot_length * c.reserve_price_edge[j][t];
        }
        obj.add_var(zj, zc);
        obj.add_var(sj, sc);
        z.push(zj);
        s.push(sj);
    }
    let s0 = map.add(&mut model, VarKey::StaticReserveCloud, 0.0, f64::INFINITY, false)?;
    obj.add_var(s0, (0..t_n).map(|t| c.slot_length * c.reserve_price_cloud[t]).sum());
    let eta = map.add(&mut model, VarKey::Eta, 0.0, f64::INFINITY, false)?;
    obj.add_var(eta, 1.0);

    let mut copies = Vec::with_capacity(pool.len());
    for (l, lambda) in pool.iter().enumerate() {
        check_demand(inst, lambda)?;
        let mut x = vec![Vec::with_capacity(j_n); i_n];
        let mut x0 = Vec::with_capacity(i_n);
        let mut cost = Expr::default();
        for i in 0..i_n {
            let v = map.add(&mut model, VarKey::StaticAllocCloud { l, i }, 0.0, f64::INFINITY, false)?;
            cost.add_var(v, horizon_cost(inst, inst.route_cost_cloud(i)));
            x0.push(v);
            for j in 0..j_n {
                let v = map.add(&mut model, VarKey::StaticAlloc { l, i, j }, 0.0, f64::INFINITY, false)?;
                cost.add_var(v, horizon_cost(inst, inst.route_cost_edge(i, j)));
                x[i].push(v);
            }
        }
        for i in 0..i_n {
            for t in 0..t_n {
                let terms = std::iter::once((x0[i], 1.0)).chain(x[i].iter().map(|&v| (v, 1.0)));
                model.add_row(format!("dem[{l},{i},{t}]"), terms, RowSense::Ge, lambda[i][t])?;
            }
        }
        for j in 0..j_n {
            let terms = (0..i_n).map(|i| (x[i][j], w)).chain([(s[j], -1.0)]);
            model.add_row(format!("bal[{l},{j}]"), terms, RowSense::Le, 0.0)?;
        }
        let terms = (0..i_n).map(|i| (x0[i], w)).chain([(s0, -1.0)]);
        model.add_row(format!("cbal[{l}]"), terms, RowSense::Le, 0.0)?;
        let mut epi = Expr::var(eta);
        epi.add(&cost, -1.0);
        add_expr_row(&mut model, format!("epi[{l}]"), &epi, RowSense::Ge, 0.0)?;
        copies.push(SaroCopy { x, x0, cost });
    }
    model.set_objective(obj.terms, obj.constant)?;
    Ok(SaroMaster { model, map, z, s, s0, eta, copies })
}

/// Recourse LP of the static baseline at a fixed plan. Demand rows carry a
/// shortfall column priced by `shortfall_price[i][t]`; with `routing = false`
/// only the shortfall is minimized.
#[derive(Clone, Debug)]
pub struct SaroRecourse {
    pub model: LinearModel,
    pub map: VarMap,
    pub x: Vec<Vec<VarId>>,
    pub x0: Vec<VarId>,
    /// `[i][t]`
    pub shortfall: Vec<Vec<VarId>>,
    /// `[i][t]`
    pub demand_rows: Vec<Vec<String>>,
}

pub fn build_saro_recourse(
    inst: &Instance,
    plan: &SaroPlan,
    lambda: &Matrix,
    shortfall_price: &Matrix,
    routing: bool,
) -> Result<SaroRecourse> {
    check_demand(inst, lambda)?;
    let (i_n, j_n, t_n) = (inst.ap_count(), inst.en_count(), inst.horizon);
    let w = inst.costs.resource_per_request;
    let mut model = LinearModel::new(if routing { "saro_recourse" } else { "saro_feasibility" }, ObjSense::Minimize);
    let mut map = VarMap::default();
    let mut obj = Vec::new();
    let mut x = vec![Vec::with_capacity(j_n); i_n];
    let mut x0 = Vec::with_capacity(i_n);
    for i in 0..i_n {
        let v = map.add(&mut model, VarKey::StaticAllocCloud { l: 0, i }, 0.0, f64::INFINITY, false)?;
        if routing {
            obj.push((v, horizon_cost(inst, inst.route_cost_cloud(i))));
        }
        x0.push(v);
        for j in 0..j_n {
            // an unplaced node cannot serve
            let ub = if plan.z[j] > 0.5 { f64::INFINITY } else { 0.0 };
            let v = map.add(&mut model, VarKey::StaticAlloc { l: 0, i, j }, 0.0, ub, false)?;
            if routing {
                obj.push((v, horizon_cost(inst, inst.route_cost_edge(i, j))));
            }
            x[i].push(v);
        }
    }
    let mut shortfall = vec![Vec::with_capacity(t_n); i_n];
    let mut demand_rows = vec![Vec::with_capacity(t_n); i_n];
    for i in 0..i_n {
        for t in 0..t_n {
            let sv = map.add(&mut model, VarKey::Shortfall { l: 0, i, t }, 0.0, f64::INFINITY, false)?;
            obj.push((sv, shortfall_price[i][t]));
            shortfall[i].push(sv);
            let name = format!("dem[0,{i},{t}]");
            let terms = std::iter::once((x0[i], 1.0)).chain(x[i].iter().map(|&v| (v, 1.0))).chain([(sv, 1.0)]);
            model.add_row(name.clone(), terms, RowSense::Ge, lambda[i][t])?;
            demand_rows[i].push(name);
        }
    }
    for j in 0..j_n {
        model.add_row(format!("bal[{j}]"), (0..i_n).map(|i| (x[i][j], w)), RowSense::Le, plan.s[j])?;
    }
    model.add_row("cbal", (0..i_n).map(|i| (x0[i], w)), RowSense::Le, plan.s0)?;
    model.set_objective(obj, 0.0)?;
    Ok(SaroRecourse { model, map, x, x0, shortfall, demand_rows })
}

/// Shortfall price for the optimality subproblem: above every marginal
/// routing value, so it is used only when demand cannot be served.
pub fn saro_penalty(inst: &Instance) -> f64 {
    let mut c_max: f64 = 0.0;
    for i in 0..inst.ap_count() {
        c_max = c_max.max(inst.route_cost_cloud(i));
        for j in 0..inst.en_count() {
            c_max = c_max.max(inst.route_cost_edge(i, j));
        }
    }
    2.0 * inst.horizon as f64 * c_max * (inst.ap_count() + inst.en_count() + 2) as f64 + 1.0
}
