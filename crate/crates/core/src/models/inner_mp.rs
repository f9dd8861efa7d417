//! Worst-case demand search over a set of fixed binary recourse points.
//!
//! For each cut the innermost LP is dualized, so its optimal value becomes a
//! maximization whose objective is linear in demand. Demand is affine in the
//! drivers, which leaves products of the demand duals with binary drivers.
//! These are aggregated per driver as `κ = Ψᵀσ` and each `κ·g±` is replaced by
//! an exact four-row linearization using the interval bounds of `κ`.

use crate::error::{Error, Result};
use crate::instance::{FirstStage, Instance, Matrix};
use crate::solver::{dualize, DualModel, LinearModel, ObjSense, RowSense, VarId};
use crate::uncertainty::{AffineDemandMap, Candidate};

use super::{build_innermost_lp, BinaryPoint, Expr, InnermostLp, VarKey, VarMap};

/// A fixed binary recourse point with the dual of its innermost LP.
#[derive(Clone, Debug)]
pub struct CutPoint {
    pub point: BinaryPoint,
    pub lp: InnermostLp,
    pub dual: DualModel,
}

impl CutPoint {
    pub fn new(inst: &Instance, fs: &FirstStage, point: BinaryPoint) -> Result<CutPoint> {
        let zero = vec![vec![0.0; inst.horizon]; inst.ap_count()];
        let lp = build_innermost_lp(inst, fs, &point, &zero)?;
        let dual = dualize(&lp.model)?;
        Ok(CutPoint { point, lp, dual })
    }

    pub fn fixed_cost(&self) -> f64 {
        self.lp.fixed_cost
    }

    fn demand_dual(&self, i: usize, t: usize) -> Result<VarId> {
        let row = &self.lp.copy.demand_rows[i][t];
        self.dual
            .dual_var(row)
            .ok_or_else(|| Error::Model(format!("no dual variable for demand row `{row}`")))
    }
}

/// Upper bound on the dual of the demand row at `(i, t)`, valid for every
/// dual-feasible point: serving one more request from the cloud costs at most
/// the routing cost plus buying `w` more cloud resources on the spot.
pub fn demand_dual_bound(inst: &Instance, i: usize, t: usize) -> Result<f64> {
    let c = &inst.costs;
    let m = inst.route_cost_cloud(i) + c.resource_per_request * c.slot_length * c.buy_price_cloud[t];
    if !m.is_finite() || m < 0.0 {
        return Err(Error::Model(format!("demand dual bound at area {i}, period {t} is not finite ({m})")));
    }
    Ok(m)
}

/// Demand-dual bounds for one binary point, valid for every demand the
/// drivers can reach. Any set of placed nodes whose capacity exceeds the
/// largest reachable load contains a node with spare capacity, so one more
/// request never costs more than the dearest node of the cheapest such set
/// charges for it. Every subgradient of the recourse value respects the
/// bound, so no optimal dual is cut off.
pub fn demand_dual_bounds(inst: &Instance, point: &BinaryPoint, max_demand: &Matrix) -> Result<Matrix> {
    let c = &inst.costs;
    let w = c.resource_per_request;
    let (i_n, j_n, t_n) = (inst.ap_count(), inst.en_count(), inst.horizon);
    let mut out = vec![vec![0.0; t_n]; i_n];
    for t in 0..t_n {
        let load: f64 = (0..i_n).map(|i| w * max_demand[i][t].max(0.0)).sum();
        let need = load * (1.0 + 1e-9) + 1e-9;
        for (i, row) in out.iter_mut().enumerate() {
            let mut bound = demand_dual_bound(inst, i, t)?;
            let mut placed: Vec<(f64, f64)> = (0..j_n)
                .filter(|&j| point.z[j][t] > 0.5)
                .map(|j| (inst.route_cost_edge(i, j) + w * c.slot_length * c.buy_price_edge[j][t], c.capacity[j]))
                .collect();
            placed.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut covered = 0.0;
            for (cost, cap) in placed {
                covered += cap;
                if covered > need {
                    bound = bound.min(cost);
                    break;
                }
            }
            row[t] = bound;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct InnerMp {
    pub model: LinearModel,
    pub map: VarMap,
    pub tau: VarId,
    /// `[i][t]`
    pub g_plus: Vec<Vec<VarId>>,
    pub g_minus: Vec<Vec<VarId>>,
    /// Per cut: dual-model variable index → Inner-MP variable.
    pub dual_vars: Vec<Vec<VarId>>,
}

impl InnerMp {
    pub fn drivers(&self, values: &[f64]) -> Candidate {
        Candidate {
            g: self
                .g_plus
                .iter()
                .zip(&self.g_minus)
                .map(|(p, m)| p.iter().zip(m).map(|(a, b)| (values[a.0].round() - values[b.0].round()) as i8).collect())
                .collect(),
        }
    }

    /// Pins the drivers to `g` through variable bounds. Budget rows are
    /// relaxed to inequalities so any budgeted `g` is admissible.
    pub fn fix_drivers(&mut self, g: &Candidate) -> Result<()> {
        for t in 0..g.g.first().map_or(0, Vec::len) {
            if let Some(row) = self.model.row_id(&format!("budget[{t}]")) {
                self.model.set_sense(row, RowSense::Le)?;
            }
        }
        for (i, row) in g.g.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                let (p, m) = match v {
                    1 => (1.0, 0.0),
                    -1 => (0.0, 1.0),
                    _ => (0.0, 0.0),
                };
                self.model.set_bounds(self.g_plus[i][t], p, p)?;
                self.model.set_bounds(self.g_minus[i][t], m, m)?;
            }
        }
        Ok(())
    }
}

pub fn build_inner_mp(
    inst: &Instance,
    cuts: &[CutPoint],
    demand: &AffineDemandMap,
    budget: usize,
    split: ProductSplit,
) -> Result<InnerMp> {
    if cuts.is_empty() {
        return Err(Error::Model("the worst-case search needs at least one cut".into()));
    }
    let (i_n, t_n) = (inst.ap_count(), inst.horizon);
    let max_demand = demand.max_demand(budget);
    let dual_cuts = cuts
        .iter()
        .map(|c| {
            let sigma = (0..i_n).map(|i| (0..t_n).map(|t| c.demand_dual(i, t)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
            let bound = demand_dual_bounds(inst, &c.point, &max_demand)?;
            Ok(DualCut { dual: &c.dual, sigma, bound })
        })
        .collect::<Result<Vec<_>>>()?;
    build_worst_case_split("inner_mp", &dual_cuts, demand, budget, split)
}

/// A dualized recourse LP whose demand rows are driven by the uncertainty.
#[derive(Clone, Debug)]
pub struct DualCut<'a> {
    pub dual: &'a DualModel,
    /// `[i][t]` dual variables of the demand rows.
    pub sigma: Vec<Vec<VarId>>,
    /// `[i][t]` valid upper bounds on `sigma` (lower bound is zero).
    pub bound: Matrix,
}

/// How the products of demand duals and drivers are grouped before
/// linearization. Finer groups give a tighter relaxation at the price of
/// more rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductSplit {
    /// One product per driver: `κ = Σ Ψ σ` over every demand row it moves.
    Driver,
    /// One product per driver and affected period.
    #[default]
    Period,
    /// One product per nonzero entry of the demand map.
    Entry,
}

/// Maximizes, over budgeted drivers, the minimum over cuts of the dual
/// objective with demand substituted by its affine map.
pub fn build_worst_case(name: &str, cuts: &[DualCut<'_>], demand: &AffineDemandMap, budget: usize) -> Result<InnerMp> {
    build_worst_case_split(name, cuts, demand, budget, ProductSplit::default())
}

/// One linearized product: `Σ_{(i,t) ∈ terms} Ψ σ[i][t]` times a driver.
struct Group {
    driver: (usize, usize),
    part: usize,
    terms: Vec<(usize, usize, f64)>,
    lo: f64,
    hi: f64,
}

fn groups_of(columns: &[Vec<Vec<(usize, usize, f64)>>], bound: &Matrix, split: ProductSplit) -> Vec<Group> {
    let mut out = Vec::new();
    for (k, per_k) in columns.iter().enumerate() {
        for (tk, col) in per_k.iter().enumerate() {
            let parts: Vec<Vec<(usize, usize, f64)>> = match split {
                ProductSplit::Driver => vec![col.clone()],
                ProductSplit::Period => {
                    let mut by_t: Vec<Vec<(usize, usize, f64)>> = Vec::new();
                    let mut ts: Vec<usize> = col.iter().map(|e| e.1).collect();
                    ts.sort_unstable();
                    ts.dedup();
                    for t in ts {
                        by_t.push(col.iter().copied().filter(|e| e.1 == t).collect());
                    }
                    by_t
                }
                ProductSplit::Entry => col.iter().map(|&e| vec![e]).collect(),
            };
            for (part, terms) in parts.into_iter().enumerate() {
                let lo = terms.iter().map(|&(i, t, p)| p.min(0.0) * bound[i][t]).sum();
                let hi = terms.iter().map(|&(i, t, p)| p.max(0.0) * bound[i][t]).sum();
                out.push(Group { driver: (k, tk), part, terms, lo, hi });
            }
        }
    }
    out
}

pub fn build_worst_case_split(
    name: &str,
    cuts: &[DualCut<'_>],
    demand: &AffineDemandMap,
    budget: usize,
    split: ProductSplit,
) -> Result<InnerMp> {
    if cuts.is_empty() {
        return Err(Error::Model("the worst-case search needs at least one cut".into()));
    }
    let (i_n, t_n) = (demand.ap_count, demand.horizon);
    let mut model = LinearModel::new(name, ObjSense::Maximize);
    let mut map = VarMap::default();
    let tau = map.add(&mut model, VarKey::Tau, f64::NEG_INFINITY, f64::INFINITY, false)?;
    let mut g_plus = vec![Vec::with_capacity(t_n); i_n];
    let mut g_minus = vec![Vec::with_capacity(t_n); i_n];
    for i in 0..i_n {
        for t in 0..t_n {
            let p = map.add(&mut model, VarKey::DrivePlus { i, t }, 0.0, 1.0, true)?;
            let m = map.add(&mut model, VarKey::DriveMinus { i, t }, 0.0, 1.0, true)?;
            model.add_row(format!("sign[{i},{t}]"), [(p, 1.0), (m, 1.0)], RowSense::Le, 1.0)?;
            g_plus[i].push(p);
            g_minus[i].push(m);
        }
    }

    // demand rows moved by each driver
    let mut columns: Vec<Vec<Vec<(usize, usize, f64)>>> = vec![vec![Vec::new(); t_n]; i_n];
    for i in 0..i_n {
        for t in 0..t_n {
            for (k, tau_k, p) in demand.row(i, t) {
                columns[k][tau_k].push((i, t, p));
            }
        }
    }

    let mut per_cut = Vec::with_capacity(cuts.len());
    for (n, cut) in cuts.iter().enumerate() {
        let bound = &cut.bound;
        if bound.len() != i_n
            || bound.iter().any(|r| r.len() != t_n)
            || bound.iter().flatten().any(|b| !b.is_finite() || *b < 0.0)
        {
            return Err(Error::Model(format!("cut {n} has no finite bound on its demand duals")));
        }
        per_cut.push(groups_of(&columns, bound, split));
    }

    // Every cut value is monotone in a driver whose products keep one sign
    // in every cut, so the opposite sign never helps. When all drivers of a
    // period are monotone the budget of that period can be spent in full.
    // 2 = untouched, 1 = nondecreasing, -1 = nonincreasing, 0 = mixed
    let mut direction = vec![vec![2i8; t_n]; i_n];
    for gr in per_cut.iter().flatten() {
        let (k, tk) = gr.driver;
        let here = if gr.lo >= 0.0 {
            1
        } else if gr.hi <= 0.0 {
            -1
        } else {
            0
        };
        let d = &mut direction[k][tk];
        *d = if *d == 2 || *d == here { here } else { 0 };
    }
    for t in 0..t_n {
        let mut monotone = true;
        for i in 0..i_n {
            match direction[i][t] {
                1 => model.set_bounds(g_minus[i][t], 0.0, 0.0)?,
                -1 => model.set_bounds(g_plus[i][t], 0.0, 0.0)?,
                2 => {}
                _ => monotone = false,
            }
        }
        let sense = if monotone { RowSense::Eq } else { RowSense::Le };
        let terms = (0..i_n).flat_map(|i| [(g_plus[i][t], 1.0), (g_minus[i][t], 1.0)]);
        model.add_row(format!("budget[{t}]"), terms, sense, budget.min(i_n) as f64)?;
    }

    let mut dual_vars = Vec::with_capacity(cuts.len());
    for ((n, cut), groups) in cuts.iter().enumerate().zip(&per_cut) {
        let dm = &cut.dual.model;
        let sigma = &cut.sigma;
        let mut demand_at = vec![None; dm.num_vars()];
        for i in 0..i_n {
            for t in 0..t_n {
                demand_at[sigma[i][t].0] = Some((i, t));
            }
        }
        let mut ids = Vec::with_capacity(dm.num_vars());
        for (k, v) in dm.vars().iter().enumerate() {
            let (lo, hi) = match demand_at[k] {
                Some((i, t)) => (v.lower.max(0.0), v.upper.min(cut.bound[i][t])),
                None => (v.lower, v.upper),
            };
            ids.push(map.add_named(&mut model, VarKey::Dual { n, k }, format!("c{n}.{}", v.name), lo, hi, false)?);
        }
        for r in dm.rows() {
            model.add_row(format!("c{n}.{}", r.name), r.terms.iter().map(|&(v, c)| (ids[v.0], c)), r.sense, r.rhs)?;
        }

        // τ ≤ constant + Σ_nondemand rhs·y + Σ offset·σ + Σ (ζ⁺ − ζ⁻)
        let mut rhs = Expr::constant(dm.objective().constant);
        for &(v, c) in &dm.objective().terms {
            if demand_at[v.0].is_none() {
                rhs.add_var(ids[v.0], c);
            }
        }
        for i in 0..i_n {
            for t in 0..t_n {
                rhs.add_var(ids[sigma[i][t].0], demand.offset[i][t]);
            }
        }
        for gr in groups {
            let (k, tk) = gr.driver;
            let (lo, hi, part) = (gr.lo, gr.hi, gr.part);
            // both signs are kept even when one is fixed at zero, so that
            // pinning the drivers later reproduces every cut exactly
            let signed = [
                (g_plus[k][tk], VarKey::ZetaPlus { n, i: k, t: tk, part }, 1.0),
                (g_minus[k][tk], VarKey::ZetaMinus { n, i: k, t: tk, part }, -1.0),
            ];
            let kappa = map.add(&mut model, VarKey::Kappa { n, i: k, t: tk, part }, lo, hi, false)?;
            let mut def = vec![(kappa, 1.0)];
            def.extend(gr.terms.iter().map(|&(i, t, p)| (ids[sigma[i][t].0], -p)));
            model.add_row(format!("kdef[{n},{k},{tk},{part}]"), def, RowSense::Eq, 0.0)?;
            for (g, key, sign) in signed {
                let zeta = map.add(&mut model, key, lo.min(0.0), hi.max(0.0), false)?;
                let tag = key.to_string();
                model.add_row(format!("{tag}.a"), [(zeta, 1.0), (kappa, -1.0), (g, -lo)], RowSense::Le, -lo)?;
                model.add_row(format!("{tag}.b"), [(zeta, 1.0), (kappa, -1.0), (g, -hi)], RowSense::Ge, -hi)?;
                model.add_row(format!("{tag}.c"), [(zeta, 1.0), (g, -hi)], RowSense::Le, 0.0)?;
                model.add_row(format!("{tag}.d"), [(zeta, 1.0), (g, -lo)], RowSense::Ge, 0.0)?;
                rhs.add_var(zeta, sign);
            }
        }
        let mut cut_row = Expr::var(tau);
        cut_row.add(&rhs, -1.0);
        super::add_expr_row(&mut model, format!("cut[{n}]"), &cut_row, RowSense::Le, 0.0)?;
        dual_vars.push(ids);
    }
    model.set_objective([(tau, 1.0)], 0.0)?;
    Ok(InnerMp { model, map, tau, g_plus, g_minus, dual_vars })
}
