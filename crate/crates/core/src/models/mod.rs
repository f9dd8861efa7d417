//! Builders for every optimization model used by the planner.
//!
//! All recourse-carrying models share one scenario-copy builder. Quantities
//! that may be either decisions or fixed data (reservation, placement
//! binaries) are passed around as affine [`Expr`]s so that the same row
//! definitions serve the master problems, the mixed-integer subproblem and the
//! innermost LP.

mod extreme;
mod inner_mp;
mod primal;
mod saro;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FirstStage, Instance, Matrix, RecoursePlan};
use crate::solver::{LinearModel, RowId, RowSense, VarId, FEAS_TOL};

pub use extreme::{build_extreme_scenario, ExtremeModel};
pub use inner_mp::{
    build_inner_mp, build_worst_case, build_worst_case_split, demand_dual_bound, demand_dual_bounds, CutPoint, DualCut,
    InnerMp, ProductSplit,
};
pub use primal::{
    build_det, build_inner_sp, build_innermost_lp, build_outer_mp, InnermostLp, OuterMp, RecourseModel,
};
pub use saro::{build_saro_master, build_saro_recourse, saro_penalty, SaroCopy, SaroMaster, SaroPlan, SaroRecourse};

/// Semantic index of a model variable. `l` is the scenario copy, `n` the cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKey {
    Reserve { j: usize, t: usize },
    ReserveCloud { t: usize },
    Eta,
    Place { l: usize, j: usize, t: usize },
    Startup { l: usize, j: usize, t: usize },
    DownloadEn { l: usize, m: usize, j: usize, t: usize },
    DownloadCloud { l: usize, j: usize, t: usize },
    Alloc { l: usize, i: usize, j: usize, t: usize },
    AllocCloud { l: usize, i: usize, t: usize },
    BuyEdge { l: usize, j: usize, t: usize },
    SellEdge { l: usize, j: usize, t: usize },
    BuyCloud { l: usize, t: usize },
    SellCloud { l: usize, t: usize },
    DrivePlus { i: usize, t: usize },
    DriveMinus { i: usize, t: usize },
    Tau,
    Residual { i: usize, t: usize },
    Demand { i: usize, t: usize },
    Dual { n: usize, k: usize },
    Kappa { n: usize, i: usize, t: usize, part: usize },
    ZetaPlus { n: usize, i: usize, t: usize, part: usize },
    ZetaMinus { n: usize, i: usize, t: usize, part: usize },
    StaticPlace { j: usize },
    StaticReserve { j: usize },
    StaticReserveCloud,
    StaticAlloc { l: usize, i: usize, j: usize },
    StaticAllocCloud { l: usize, i: usize },
    Shortfall { l: usize, i: usize, t: usize },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use VarKey::*;
        match *self {
            Reserve { j, t } => write!(f, "s[{j},{t}]"),
            ReserveCloud { t } => write!(f, "s0[{t}]"),
            Eta => write!(f, "eta"),
            Place { l, j, t } => write!(f, "z[{l},{j},{t}]"),
            Startup { l, j, t } => write!(f, "u[{l},{j},{t}]"),
            DownloadEn { l, m, j, t } => write!(f, "q[{l},{m},{j},{t}]"),
            DownloadCloud { l, j, t } => write!(f, "q0[{l},{j},{t}]"),
            Alloc { l, i, j, t } => write!(f, "x[{l},{i},{j},{t}]"),
            AllocCloud { l, i, t } => write!(f, "x0[{l},{i},{t}]"),
            BuyEdge { l, j, t } => write!(f, "yb[{l},{j},{t}]"),
            SellEdge { l, j, t } => write!(f, "ys[{l},{j},{t}]"),
            BuyCloud { l, t } => write!(f, "yb0[{l},{t}]"),
            SellCloud { l, t } => write!(f, "ys0[{l},{t}]"),
            DrivePlus { i, t } => write!(f, "gp[{i},{t}]"),
            DriveMinus { i, t } => write!(f, "gm[{i},{t}]"),
            Tau => write!(f, "tau"),
            Residual { i, t } => write!(f, "r[{i},{t}]"),
            Demand { i, t } => write!(f, "lam[{i},{t}]"),
            Dual { n, k } => write!(f, "dual[{n},{k}]"),
            Kappa { n, i, t, part } => write!(f, "kappa[{n},{i},{t},{part}]"),
            ZetaPlus { n, i, t, part } => write!(f, "zp[{n},{i},{t},{part}]"),
            ZetaMinus { n, i, t, part } => write!(f, "zm[{n},{i},{t},{part}]"),
            StaticPlace { j } => write!(f, "zs[{j}]"),
            StaticReserve { j } => write!(f, "ss[{j}]"),
            StaticReserveCloud => write!(f, "ss0"),
            StaticAlloc { l, i, j } => write!(f, "xs[{l},{i},{j}]"),
            StaticAllocCloud { l, i } => write!(f, "xs0[{l},{i}]"),
            Shortfall { l, i, t } => write!(f, "short[{l},{i},{t}]"),
        }
    }
}

/// Bijection between semantic keys and model variables.
#[derive(Clone, Debug, Default)]
pub struct VarMap {
    ids: HashMap<VarKey, VarId>,
    keys: Vec<VarKey>,
}

impl VarMap {
    pub fn get(&self, key: VarKey) -> Option<VarId> {
        self.ids.get(&key).copied()
    }

    pub fn key(&self, id: VarId) -> VarKey {
        self.keys[id.0]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarKey, VarId)> + '_ {
        self.keys.iter().enumerate().map(|(k, &key)| (key, VarId(k)))
    }

    pub(crate) fn add(
        &mut self,
        model: &mut LinearModel,
        key: VarKey,
        lower: f64,
        upper: f64,
        integer: bool,
    ) -> Result<VarId> {
        self.add_named(model, key, key.to_string(), lower, upper, integer)
    }

    pub(crate) fn add_named(
        &mut self,
        model: &mut LinearModel,
        key: VarKey,
        name: String,
        lower: f64,
        upper: f64,
        integer: bool,
    ) -> Result<VarId> {
        if self.ids.contains_key(&key) {
            return Err(Error::Model(format!("variable {key} declared twice")));
        }
        let id = model.add_var(name, lower, upper, integer)?;
        debug_assert_eq!(id.0, self.keys.len(), "every variable must be registered in the map");
        self.ids.insert(key, id);
        self.keys.push(key);
        Ok(id)
    }
}

/// Affine expression over model variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn var(v: VarId) -> Expr {
        Expr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Expr {
        Expr { terms: Vec::new(), constant: c }
    }

    pub fn add(&mut self, other: &Expr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
    }

    pub fn add_var(&mut self, v: VarId, c: f64) {
        if c != 0.0 {
            self.terms.push((v, c));
        }
    }

    pub fn value(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

/// Adds `expr (sense) rhs`. Rows without variables are checked and dropped.
pub(crate) fn add_expr_row(
    model: &mut LinearModel,
    name: String,
    expr: &Expr,
    sense: RowSense,
    rhs: f64,
) -> Result<Option<RowId>> {
    let rhs = rhs - expr.constant;
    if expr.terms.iter().all(|&(_, c)| c == 0.0) {
        let ok = match sense {
            RowSense::Le => 0.0 <= rhs + FEAS_TOL,
            RowSense::Ge => 0.0 >= rhs - FEAS_TOL,
            RowSense::Eq => rhs.abs() <= FEAS_TOL,
        };
        return if ok { Ok(None) } else { Err(Error::Model(format!("fixed data violates row `{name}`"))) };
    }
    Ok(Some(model.add_row(name, expr.terms.iter().copied(), sense, rhs)?))
}

/// Placement, startup and download binaries of one recourse solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryPoint {
    /// `[j][t]`
    pub z: Matrix,
    /// `[j][t]`
    pub u: Matrix,
    /// `[m][j][t]`
    pub q: Vec<Matrix>,
    /// `[j][t]`
    pub q0: Matrix,
}

impl BinaryPoint {
    pub fn from_plan(plan: &RecoursePlan) -> BinaryPoint {
        let round = |m: &Matrix| -> Matrix { m.iter().map(|r| r.iter().map(|x| x.round()).collect()).collect() };
        BinaryPoint {
            z: round(&plan.placement),
            u: round(&plan.startup),
            q: plan.download_en.iter().map(round).collect(),
            q0: round(&plan.download_cloud),
        }
    }

    /// Exact equality of the rounded binaries.
    pub fn same_as(&self, other: &BinaryPoint) -> bool {
        self == other
    }
}

/// Reservation variables of a master problem.
#[derive(Clone, Debug)]
pub struct ReserveVars {
    pub edge: Vec<Vec<VarId>>,
    pub cloud: Vec<VarId>,
}

impl ReserveVars {
    pub(crate) fn declare(model: &mut LinearModel, map: &mut VarMap, inst: &Instance) -> Result<ReserveVars> {
        let t_n = inst.horizon;
        let mut edge = Vec::with_capacity(inst.en_count());
        for j in 0..inst.en_count() {
            let mut row = Vec::with_capacity(t_n);
            for t in 0..t_n {
                row.push(map.add(model, VarKey::Reserve { j, t }, 0.0, inst.costs.capacity[j], false)?);
            }
            edge.push(row);
        }
        let cloud = (0..t_n)
            .map(|t| map.add(model, VarKey::ReserveCloud { t }, 0.0, f64::INFINITY, false))
            .collect::<Result<_>>()?;
        Ok(ReserveVars { edge, cloud })
    }

    pub fn extract(&self, values: &[f64]) -> FirstStage {
        FirstStage {
            edge: self.edge.iter().map(|r| r.iter().map(|v| values[v.0].max(0.0)).collect()).collect(),
            cloud: self.cloud.iter().map(|v| values[v.0].max(0.0)).collect(),
        }
    }

    /// Reservation cost over all nodes and periods.
    pub fn cost(&self, inst: &Instance) -> Expr {
        let c = &inst.costs;
        let mut e = Expr::default();
        for t in 0..inst.horizon {
            e.add_var(self.cloud[t], c.slot_length * c.reserve_price_cloud[t]);
            for j in 0..inst.en_count() {
                e.add_var(self.edge[j][t], c.slot_length * c.reserve_price_edge[j][t]);
            }
        }
        e
    }
}

/// Where the reservation of a recourse copy comes from.
#[derive(Clone, Copy, Debug)]
pub enum Reserve<'a> {
    Vars(&'a ReserveVars),
    Fixed(&'a FirstStage),
}

impl Reserve<'_> {
    fn edge(&self, j: usize, t: usize) -> Expr {
        match self {
            Reserve::Vars(v) => Expr::var(v.edge[j][t]),
            Reserve::Fixed(fs) => Expr::constant(fs.edge[j][t]),
        }
    }

    fn cloud(&self, t: usize) -> Expr {
        match self {
            Reserve::Vars(v) => Expr::var(v.cloud[t]),
            Reserve::Fixed(fs) => Expr::constant(fs.cloud[t]),
        }
    }
}

/// Reservation cost of a fixed first stage.
pub fn reservation_cost(inst: &Instance, fs: &FirstStage) -> f64 {
    let c = &inst.costs;
    let mut total = 0.0;
    for t in 0..inst.horizon {
        total += c.slot_length * c.reserve_price_cloud[t] * fs.cloud[t];
        for j in 0..inst.en_count() {
            total += c.slot_length * c.reserve_price_edge[j][t] * fs.edge[j][t];
        }
    }
    total
}

/// Variables (or fixed values) of one scenario copy of the recourse problem.
#[derive(Clone, Debug)]
pub struct RecourseCopy {
    pub l: usize,
    pub z: Vec<Vec<Expr>>,
    pub u: Vec<Vec<Expr>>,
    /// `None` on the diagonal.
    pub q: Vec<Vec<Vec<Option<Expr>>>>,
    pub q0: Vec<Vec<Expr>>,
    pub x: Vec<Vec<Vec<VarId>>>,
    pub x0: Vec<Vec<VarId>>,
    pub yb: Vec<Vec<VarId>>,
    pub ys: Vec<Vec<VarId>>,
    pub yb0: Vec<VarId>,
    pub ys0: Vec<VarId>,
    /// Second-stage cost of this copy.
    pub cost: Expr,
    /// Row names of the demand constraints, `[i][t]`.
    pub demand_rows: Vec<Vec<String>>,
}

impl RecourseCopy {
    pub fn extract(&self, inst: &Instance, values: &[f64]) -> RecoursePlan {
        let val = |v: &VarId| values[v.0].max(0.0);
        let bin = |e: &Expr| e.value(values).round().clamp(0.0, 1.0);
        let mut plan = RecoursePlan {
            placement: self.z.iter().map(|r| r.iter().map(bin).collect()).collect(),
            startup: self.u.iter().map(|r| r.iter().map(|e| e.value(values)).collect()).collect(),
            download_en: self
                .q
                .iter()
                .map(|m| m.iter().map(|r| r.iter().map(|e| e.as_ref().map_or(0.0, bin)).collect()).collect())
                .collect(),
            download_cloud: self.q0.iter().map(|r| r.iter().map(bin).collect()).collect(),
            alloc: self.x.iter().map(|m| m.iter().map(|r| r.iter().map(val).collect()).collect()).collect(),
            alloc_cloud: self.x0.iter().map(|r| r.iter().map(val).collect()).collect(),
            buy_edge: self.yb.iter().map(|r| r.iter().map(val).collect()).collect(),
            buy_cloud: self.yb0.iter().map(val).collect(),
            sell_edge: self.ys.iter().map(|r| r.iter().map(val).collect()).collect(),
            sell_cloud: self.ys0.iter().map(val).collect(),
        };
        plan.tighten_startup(&inst.costs.initial_placement);
        plan
    }
}

/// Placement binaries of a copy: free decisions or a fixed point.
#[derive(Clone, Copy, Debug)]
pub enum Binaries<'a> {
    Free,
    Fixed(&'a BinaryPoint),
}

pub(crate) fn demand_row_name(l: usize, i: usize, t: usize) -> String {
    format!("dem[{l},{i},{t}]")
}

/// Declares one recourse copy and all of its constraints.
pub(crate) fn add_recourse_copy(
    model: &mut LinearModel,
    map: &mut VarMap,
    inst: &Instance,
    l: usize,
    lambda: &Matrix,
    reserve: Reserve<'_>,
    binaries: Binaries<'_>,
) -> Result<RecourseCopy> {
    let (i_n, j_n, t_n) = (inst.ap_count(), inst.en_count(), inst.horizon);
    if lambda.len() != i_n || lambda.iter().any(|r| r.len() != t_n) {
        return Err(Error::Dimension(format!("demand must be {i_n}x{t_n}")));
    }
    let c = &inst.costs;
    let d = c.slot_length;
    let inf = f64::INFINITY;
    let mut cost = Expr::default();

    let mut bin = |model: &mut LinearModel, key: VarKey, fixed: Option<f64>, upper: f64, integer: bool| -> Result<Expr> {
        match fixed {
            Some(v) => Ok(Expr::constant(v)),
            None => Ok(Expr::var(map.add(model, key, 0.0, upper, integer)?)),
        }
    };
    let fixed = match binaries {
        Binaries::Fixed(p) => Some(p),
        Binaries::Free => None,
    };

    let mut z = vec![Vec::with_capacity(t_n); j_n];
    let mut u = vec![Vec::with_capacity(t_n); j_n];
    let mut q0 = vec![Vec::with_capacity(t_n); j_n];
    let mut q = vec![vec![Vec::with_capacity(t_n); j_n]; j_n];
    for j in 0..j_n {
        for t in 0..t_n {
            z[j].push(bin(model, VarKey::Place { l, j, t }, fixed.map(|p| p.z[j][t]), 1.0, true)?);
            u[j].push(bin(model, VarKey::Startup { l, j, t }, fixed.map(|p| p.u[j][t]), 1.0, false)?);
            q0[j].push(bin(model, VarKey::DownloadCloud { l, j, t }, fixed.map(|p| p.q0[j][t]), 1.0, true)?);
        }
    }
    for m in 0..j_n {
        for j in 0..j_n {
            for t in 0..t_n {
                let e = if m == j {
                    None
                } else {
                    Some(bin(model, VarKey::DownloadEn { l, m, j, t }, fixed.map(|p| p.q[m][j][t]), 1.0, true)?)
                };
                q[m][j].push(e);
            }
        }
    }
    let mut cont = |model: &mut LinearModel, key: VarKey| map.add(model, key, 0.0, inf, false);
    let mut x = vec![vec![Vec::with_capacity(t_n); j_n]; i_n];
    let mut x0 = vec![Vec::with_capacity(t_n); i_n];
    for i in 0..i_n {
        for t in 0..t_n {
            x0[i].push(cont(model, VarKey::AllocCloud { l, i, t })?);
            for j in 0..j_n {
                x[i][j].push(cont(model, VarKey::Alloc { l, i, j, t })?);
            }
        }
    }
    let mut yb = vec![Vec::with_capacity(t_n); j_n];
    let mut ys = vec![Vec::with_capacity(t_n); j_n];
    let mut yb0 = Vec::with_capacity(t_n);
    let mut ys0 = Vec::with_capacity(t_n);
    for t in 0..t_n {
        for j in 0..j_n {
            yb[j].push(cont(model, VarKey::BuyEdge { l, j, t })?);
            ys[j].push(cont(model, VarKey::SellEdge { l, j, t })?);
        }
        yb0.push(cont(model, VarKey::BuyCloud { l, t })?);
        ys0.push(cont(model, VarKey::SellCloud { l, t })?);
    }

    // cost
    for t in 0..t_n {
        cost.add_var(yb0[t], d * c.buy_price_cloud[t]);
        cost.add_var(ys0[t], -d * c.sell_price_cloud[t]);
        for j in 0..j_n {
            cost.add_var(yb[j][t], d * c.buy_price_edge[j][t]);
            cost.add_var(ys[j][t], -d * c.sell_price_edge[j][t]);
            cost.add(&u[j][t], c.install_cost[j][t]);
            cost.add(&z[j][t], c.storage_cost[j][t]);
            cost.add(&q0[j][t], c.download_cloud[j][t]);
            for m in (0..j_n).filter(|&m| m != j) {
                cost.add(q[m][j][t].as_ref().expect("off-diagonal download"), c.download_en[m][j][t]);
            }
        }
        for i in 0..i_n {
            cost.add_var(x0[i][t], inst.route_cost_cloud(i));
            for j in 0..j_n {
                cost.add_var(x[i][j][t], inst.route_cost_edge(i, j));
            }
        }
    }

    let w = c.resource_per_request;
    let mut demand_rows = vec![Vec::with_capacity(t_n); i_n];
    for t in 0..t_n {
        for i in 0..i_n {
            let mut e = Expr::var(x0[i][t]);
            for j in 0..j_n {
                e.add_var(x[i][j][t], 1.0);
            }
            let name = demand_row_name(l, i, t);
            model.add_row(name.clone(), e.terms, RowSense::Ge, lambda[i][t])?;
            demand_rows[i].push(name);
        }
        for j in 0..j_n {
            let mut net = reserve.edge(j, t);
            net.add_var(yb[j][t], 1.0);
            net.add_var(ys[j][t], -1.0);
            let mut cap = net.clone();
            cap.add(&z[j][t], -c.capacity[j]);
            add_expr_row(model, format!("cap[{l},{j},{t}]"), &cap, RowSense::Le, 0.0)?;
            let mut bal = net;
            for i in 0..i_n {
                bal.add_var(x[i][j][t], -w);
            }
            add_expr_row(model, format!("bal[{l},{j},{t}]"), &bal, RowSense::Ge, 0.0)?;
            let mut sell = Expr::var(ys[j][t]);
            sell.add(&reserve.edge(j, t), -1.0);
            add_expr_row(model, format!("sell[{l},{j},{t}]"), &sell, RowSense::Le, 0.0)?;
        }
        let mut cbal = reserve.cloud(t);
        cbal.add_var(yb0[t], 1.0);
        cbal.add_var(ys0[t], -1.0);
        for i in 0..i_n {
            cbal.add_var(x0[i][t], -w);
        }
        add_expr_row(model, format!("cbal[{l},{t}]"), &cbal, RowSense::Ge, 0.0)?;
        let mut csell = Expr::var(ys0[t]);
        csell.add(&reserve.cloud(t), -1.0);
        add_expr_row(model, format!("csell[{l},{t}]"), &csell, RowSense::Le, 0.0)?;

        let prev = |j: usize| if t == 0 { Expr::constant(inst.initial(j)) } else { z[j][t - 1].clone() };
        if j_n > 1 {
            for m in 0..j_n {
                let mut src = Expr::default();
                for j in (0..j_n).filter(|&j| j != m) {
                    src.add(q[m][j][t].as_ref().expect("off-diagonal download"), 1.0);
                }
                src.add(&prev(m), -1.0);
                add_expr_row(model, format!("src[{l},{m},{t}]"), &src, RowSense::Le, 0.0)?;
            }
        }
        for j in 0..j_n {
            let mut rise = z[j][t].clone();
            rise.add(&prev(j), -1.0);
            let mut need = q0[j][t].clone();
            for m in (0..j_n).filter(|&m| m != j) {
                need.add(q[m][j][t].as_ref().expect("off-diagonal download"), 1.0);
            }
            need.add(&rise, -1.0);
            add_expr_row(model, format!("need[{l},{j},{t}]"), &need, RowSense::Ge, 0.0)?;
            let mut start = u[j][t].clone();
            start.add(&rise, -1.0);
            add_expr_row(model, format!("start[{l},{j},{t}]"), &start, RowSense::Ge, 0.0)?;
        }
    }

    Ok(RecourseCopy { l, z, u, q, q0, x, x0, yb, ys, yb0, ys0, cost, demand_rows })
}
