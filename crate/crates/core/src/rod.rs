//! Nested column-and-constraint generation.
//!
//! The outer loop alternates between a master over the reservation with one
//! recourse copy per scenario, and an inner loop computing the worst-case
//! recourse value at the current reservation. The inner loop alternates
//! between the mixed-integer recourse at a fixed demand and a worst-case
//! demand search over the binary recourse points collected so far.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CostBreakdown, FirstStage, Instance, Matrix, RecoursePlan};
use crate::models::{
    build_det, build_inner_mp, build_inner_sp, build_outer_mp, build_saro_master, build_saro_recourse,
    build_worst_case, reservation_cost, saro_penalty, BinaryPoint, CutPoint, DualCut, ProductSplit, SaroPlan,
};
use crate::solver::{dualize, solve, LinearModel, SolveParams, SolveResult, SolveStatus};
use crate::uncertainty::{extreme_total_demand, AffineDemandMap, Candidate, UncertaintySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RodConfig {
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub product_split: ProductSplit,
    pub solver: SolveParams,
    /// Wall-clock budget in seconds for a whole run (`None` = unlimited).
    pub time_limit: Option<f64>,
}

impl Default for RodConfig {
    fn default() -> Self {
        RodConfig { eps_outer: 1e-3, eps_inner: 1e-3, max_outer: 50, max_inner: 100, product_split: ProductSplit::default(), solver: SolveParams::default(), time_limit: None }
    }
}

impl RodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_outer > 0.0 && self.eps_inner > 0.0) {
            return Err(Error::Validation(vec!["convergence gaps must be positive".into()]));
        }
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err(Error::Validation(vec!["iteration caps must be at least 1".into()]));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Validation(vec!["time limit must be positive".into()]));
        }
        Ok(())
    }
}

/// Remaining wall-clock budget of a run.
#[derive(Clone, Copy, Debug)]
struct Deadline(Option<Instant>);

impl Deadline {
    fn new(limit: Option<f64>) -> Self {
        Deadline(limit.map(|s| Instant::now() + Duration::from_secs_f64(s)))
    }

    fn expired(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }

    /// Solver parameters capped by the remaining budget.
    fn params(&self, base: &SolveParams) -> SolveParams {
        let mut p = base.clone();
        if let Some(d) = self.0 {
            let left = d.saturating_duration_since(Instant::now()).as_secs_f64().max(1e-3);
            p.time_limit = Some(p.time_limit.map_or(left, |t| t.min(left)));
        }
        p
    }
}

/// `(UB - LB) / max(|UB|, 1e-12)`.
pub fn relative_gap(lb: f64, ub: f64) -> f64 {
    if lb == f64::NEG_INFINITY || ub == f64::INFINITY {
        return f64::INFINITY;
    }
    (ub - lb) / ub.abs().max(1e-12)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    /// Bound after this iteration (running best).
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    /// Value returned by this iteration's lower-bounding solve.
    pub raw_lb: f64,
    /// Value returned by this iteration's upper-bounding solve, if any.
    pub raw_ub: Option<f64>,
    pub wall_ms: f64,
    pub scenario_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerRun {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub termination: String,
    /// Worst scenario found (attains the final lower bound).
    pub worst: Candidate,
    pub worst_demand: Matrix,
    pub lb: f64,
    pub ub: f64,
    pub cuts: Vec<BinaryPoint>,
}

impl InnerRun {
    /// Worst-case recourse value reported to the outer loop.
    pub fn value(&self) -> f64 {
        self.ub
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub g: Candidate,
    pub demand: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodResult {
    pub model: String,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub converged: bool,
    pub first_stage: FirstStage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_plan: Option<SaroPlan>,
    pub pool: Vec<ScenarioEntry>,
    pub outer: Vec<IterationRecord>,
    pub inner: Vec<InnerRun>,
    /// Cost under the worst scenario of the final inner run.
    pub breakdown: Option<CostBreakdown>,
    pub worst_recourse: Option<RecoursePlan>,
    pub diagnostics: Vec<String>,
    pub wall_ms: f64,
}

impl RodResult {
    /// One JSON object per iteration, outer and inner interleaved.
    pub fn iteration_log(&self) -> Vec<serde_json::Value> {
        let mut out = Vec::new();
        for (k, o) in self.outer.iter().enumerate() {
            if let Some(run) = self.inner.get(k) {
                for r in &run.iterations {
                    out.push(log_line("inner", "r", r));
                }
            }
            out.push(log_line("outer", "k", o));
        }
        out
    }
}

fn log_line(level: &str, key: &str, r: &IterationRecord) -> serde_json::Value {
    let num = |x: f64| if x.is_finite() { serde_json::json!(x) } else { serde_json::Value::Null };
    serde_json::json!({
        "level": level,
        key: r.index,
        "LB": num(r.lb),
        "UB": num(r.ub),
        "gap": num(r.gap),
        "wall_ms": r.wall_ms,
        "scenario_digest": r.scenario_digest,
    })
}

pub(crate) fn solve_checked(model: &LinearModel, params: &SolveParams) -> Result<SolveResult> {
    let r = solve(model, params).map_err(|e| Error::from(e).context(format!("solving `{}`", model.name())))?;
    if !r.status.has_solution() {
        return Err(Error::SolveStatus { model: model.name().to_string(), status: r.status });
    }
    if r.status != SolveStatus::Optimal {
        warn!("`{}` stopped with {:?}, gap {:.2e}", model.name(), r.status, r.mip_gap);
    }
    Ok(r)
}

/// Mixed-integer recourse at fixed reservation and demand.
pub fn recourse_at(inst: &Instance, fs: &FirstStage, lambda: &Matrix, params: &SolveParams) -> Result<(f64, RecoursePlan)> {
    let (v, _, plan) = recourse_bounded(inst, fs, lambda, params)?;
    Ok((v, plan))
}

/// Like [`recourse_at`], also returning the solver's proven lower bound.
fn recourse_bounded(
    inst: &Instance,
    fs: &FirstStage,
    lambda: &Matrix,
    params: &SolveParams,
) -> Result<(f64, f64, RecoursePlan)> {
    let sp = build_inner_sp(inst, fs, lambda)?;
    let r = solve_checked(&sp.model, params)?;
    Ok((r.objective, r.bound, sp.copy.extract(inst, &r.values)))
}

/// Worst-case recourse value at a fixed reservation.
pub fn inner_loop(
    inst: &Instance,
    fs: &FirstStage,
    spec: &UncertaintySpec,
    start: &Candidate,
    cfg: &RodConfig,
) -> Result<InnerRun> {
    let map = spec.affine_map(&inst.forecast)?;
    inner_loop_with_map(inst, fs, spec, &map, start, cfg, Deadline::new(cfg.time_limit))
}

fn inner_loop_with_map(
    inst: &Instance,
    fs: &FirstStage,
    spec: &UncertaintySpec,
    map: &AffineDemandMap,
    start: &Candidate,
    cfg: &RodConfig,
    deadline: Deadline,
) -> Result<InnerRun> {
    let budget = spec.budget();
    let mut g = start.clone();
    let mut lambda = spec.realize(&inst.forecast, &g)?;
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut worst = (g.clone(), lambda.clone());
    let mut cuts: Vec<CutPoint> = Vec::new();
    let mut seen: HashSet<Candidate> = HashSet::new();
    let mut iterations = Vec::new();
    let mut termination = String::from("iteration cap");
    let mut converged = false;

    for r in 1..=cfg.max_inner {
        if deadline.expired() {
            termination = "time limit".into();
            break;
        }
        let clock = Instant::now();
        seen.insert(g.clone());
        let (value, proven, plan) = recourse_bounded(inst, fs, &lambda, &deadline.params(&cfg.solver))?;
        if proven > lb {
            lb = proven;
            worst = (g.clone(), lambda.clone());
        }
        let point = BinaryPoint::from_plan(&plan);
        let repeated = cuts.iter().any(|c| c.point.same_as(&point));
        let mut raw_ub = None;
        if !repeated {
            cuts.push(CutPoint::new(inst, fs, point)?);
            let mp = build_inner_mp(inst, &cuts, map, budget, cfg.product_split)?;
            let res = match solve_checked(&mp.model, &deadline.params(&cfg.solver)) {
                Ok(res) => res,
                Err(e) if deadline.expired() => {
                    debug!("worst-case search cut short: {e}");
                    termination = "time limit".into();
                    break;
                }
                Err(e) => return Err(e),
            };
            raw_ub = Some(res.objective);
            ub = ub.min(res.bound);
            g = mp.drivers(&res.values);
        }
        let gap = relative_gap(lb, ub);
        iterations.push(IterationRecord {
            index: r,
            lb,
            ub,
            gap,
            raw_lb: value,
            raw_ub,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            scenario_digest: worst.0.digest(),
        });
        debug!("inner r={r} LB={lb:.9} UB={ub:.9} gap={gap:.3e}");
        if repeated {
            // no new cut can be added; with exact solves LB = UB here
            termination = format!("binary point repeated at r={r}");
            converged = gap <= cfg.eps_inner;
            break;
        }
        if gap <= cfg.eps_inner {
            termination = "gap".into();
            converged = true;
            break;
        }
        if seen.contains(&g) {
            termination = format!("scenario repeated at r={r}");
            converged = gap <= cfg.eps_inner;
            break;
        }
        lambda = spec.realize(&inst.forecast, &g)?;
    }
    if lb > ub {
        ub = lb;
    }
    Ok(InnerRun {
        iterations,
        converged,
        termination,
        worst: worst.0,
        worst_demand: worst.1,
        lb,
        ub,
        cuts: cuts.into_iter().map(|c| c.point).collect(),
    })
}

pub fn solve_rod(inst: &Instance, cfg: &RodConfig) -> Result<RodResult> {
    solve_rod_with(inst, &inst.uncertainty, cfg)
}

/// Outer loop over the reservation.
pub fn solve_rod_with(inst: &Instance, spec: &UncertaintySpec, cfg: &RodConfig) -> Result<RodResult> {
    cfg.validate()?;
    let started = Instant::now();
    let deadline = Deadline::new(cfg.time_limit);
    let map = spec.affine_map(&inst.forecast)?;
    let (g1, lambda1) = extreme_total_demand(spec, &inst.forecast)?;
    let mut pool = vec![ScenarioEntry { g: g1, demand: lambda1 }];
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best: Option<(FirstStage, usize)> = None;
    let mut outer = Vec::new();
    let mut inner = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;

    for k in 1..=cfg.max_outer {
        let clock = Instant::now();
        let demands: Vec<Matrix> = pool.iter().map(|p| p.demand.clone()).collect();
        let mp = build_outer_mp(inst, &demands)?;
        let res = solve_checked(&mp.model, &deadline.params(&cfg.solver))
            .map_err(|e| e.context(format!("outer iteration {k}")))?;
        lb = lb.max(res.bound);
        let fs = mp.reserve.extract(&res.values);

        let start = pool.last().expect("pool is never empty").g.clone();
        let run = inner_loop_with_map(inst, &fs, spec, &map, &start, cfg, deadline)
            .map_err(|e| e.context(format!("inner loop of outer iteration {k}")))?;
        if !run.converged {
            diagnostics.push(format!("inner loop at k={k} stopped unconverged ({}), gap {:.3e}", run.termination, relative_gap(run.lb, run.ub)));
        }
        let upper = reservation_cost(inst, &fs) + run.value();
        if upper < ub || best.is_none() {
            ub = ub.min(upper);
            best = Some((fs, inner.len()));
        }
        let gap = relative_gap(lb, ub);
        let worst = ScenarioEntry { g: run.worst.clone(), demand: run.worst_demand.clone() };
        outer.push(IterationRecord {
            index: k,
            lb,
            ub,
            gap,
            raw_lb: res.objective,
            raw_ub: Some(upper),
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            scenario_digest: worst.g.digest(),
        });
        inner.push(run);
        info!("outer k={k} LB={lb:.9} UB={ub:.9} gap={gap:.3e}");
        if gap <= cfg.eps_outer {
            converged = true;
            break;
        }
        if deadline.expired() {
            diagnostics.push(format!("time limit reached at k={k} with gap {gap:.3e}"));
            break;
        }
        if pool.iter().any(|p| p.g == worst.g) {
            diagnostics.push(format!("worst scenario at k={k} is already in the pool; stopping with gap {gap:.3e}"));
            converged = gap <= cfg.eps_outer;
            break;
        }
        pool.push(worst);
        if k == cfg.max_outer {
            diagnostics.push(format!("outer iteration cap {} reached", cfg.max_outer));
        }
    }
    let (fs, run_idx) = best.ok_or_else(|| Error::Model("no reservation was evaluated within the time limit".into()))?;
    let worst_demand = inner[run_idx].worst_demand.clone();
    let (_, plan) = recourse_at(inst, &fs, &worst_demand, &cfg.solver)?;
    let breakdown = inst.cost_breakdown(&fs, &plan)?;
    let name = match spec {
        UncertaintySpec::Sus(_) => "daro-sus",
        UncertaintySpec::Dus(_) => "daro-dus",
    };
    Ok(RodResult {
        model: name.into(),
        objective: ub,
        lower_bound: lb,
        gap: relative_gap(lb, ub),
        converged,
        first_stage: fs,
        static_plan: None,
        pool,
        outer,
        inner,
        breakdown: Some(breakdown),
        worst_recourse: Some(plan),
        diagnostics,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Det,
    Saro,
    DaroSus,
    DaroDus,
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(Baseline::Det),
            "saro" => Ok(Baseline::Saro),
            "daro-sus" | "daro_sus" => Ok(Baseline::DaroSus),
            "daro-dus" | "daro_dus" => Ok(Baseline::DaroDus),
            other => Err(Error::Unsupported(format!("unknown model `{other}`"))),
        }
    }
}

pub fn solve_baseline(inst: &Instance, which: Baseline, spec: &UncertaintySpec, cfg: &RodConfig) -> Result<RodResult> {
    match (which, spec) {
        (Baseline::Det, _) => solve_det(inst, &inst.forecast, cfg),
        (Baseline::Saro, UncertaintySpec::Sus(_)) => solve_saro(inst, spec, cfg),
        (Baseline::DaroSus, UncertaintySpec::Sus(_)) | (Baseline::DaroDus, UncertaintySpec::Dus(_)) => {
            solve_rod_with(inst, spec, cfg)
        }
        (Baseline::Saro, _) | (Baseline::DaroSus, _) => {
            Err(Error::Unsupported(format!("{which:?} needs a static uncertainty set")))
        }
        (Baseline::DaroDus, _) => Err(Error::Unsupported("daro-dus needs a dynamic uncertainty set".into())),
    }
}

/// Deterministic model at a single demand matrix.
pub fn solve_det(inst: &Instance, lambda: &Matrix, cfg: &RodConfig) -> Result<RodResult> {
    let started = Instant::now();
    let det = build_det(inst, lambda)?;
    let res = solve_checked(&det.model, &cfg.solver)?;
    let fs = det.reserve.extract(&res.values);
    let plan = det.copies[0].extract(inst, &res.values);
    let breakdown = inst.cost_breakdown(&fs, &plan)?;
    let g = Candidate::zeros(inst.ap_count(), inst.horizon);
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(RodResult {
        model: "det".into(),
        objective: res.objective,
        lower_bound: res.objective,
        gap: 0.0,
        converged: true,
        first_stage: fs,
        static_plan: None,
        pool: vec![ScenarioEntry { g: g.clone(), demand: lambda.clone() }],
        outer: vec![IterationRecord {
            index: 1,
            lb: res.objective,
            ub: res.objective,
            gap: 0.0,
            raw_lb: res.objective,
            raw_ub: Some(res.objective),
            wall_ms,
            scenario_digest: g.digest(),
        }],
        inner: Vec::new(),
        breakdown: Some(breakdown),
        worst_recourse: Some(plan),
        diagnostics: Vec::new(),
        wall_ms,
    })
}

/// Worst shortfall (`routing = false`) or worst penalized routing cost of the
/// static recourse at `plan`.
fn saro_worst(
    inst: &Instance,
    plan: &SaroPlan,
    map: &AffineDemandMap,
    budget: usize,
    routing: bool,
    params: &SolveParams,
) -> Result<(f64, Candidate)> {
    let price = if routing { saro_penalty(inst) } else { 1.0 };
    let prices = vec![vec![price; inst.horizon]; inst.ap_count()];
    let zero = vec![vec![0.0; inst.horizon]; inst.ap_count()];
    let lp = build_saro_recourse(inst, plan, &zero, &prices, routing)?;
    let dual = dualize(&lp.model)?;
    let sigma = lp
        .demand_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|name| dual.dual_var(name).ok_or_else(|| Error::Model(format!("no dual for `{name}`"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cut = DualCut { dual: &dual, sigma, bound: prices };
    let name = if routing { "saro_worst_cost" } else { "saro_worst_shortfall" };
    let mp = build_worst_case(name, std::slice::from_ref(&cut), map, budget)?;
    let res = solve_checked(&mp.model, params)?;
    Ok((res.bound, mp.drivers(&res.values)))
}

/// Static routing at a fixed plan: `(routing cost, shortfall, x, x0)`.
pub fn saro_route(
    inst: &Instance,
    plan: &SaroPlan,
    lambda: &Matrix,
    shortfall_price: &Matrix,
    params: &SolveParams,
) -> Result<(f64, Matrix, Matrix, Vec<f64>)> {
    let lp = build_saro_recourse(inst, plan, lambda, shortfall_price, true)?;
    let res = solve_checked(&lp.model, params)?;
    let v = |id: &crate::solver::VarId| res.values[id.0].max(0.0);
    let shortfall: Matrix = lp.shortfall.iter().map(|r| r.iter().map(v).collect()).collect();
    let x: Matrix = lp.x.iter().map(|r| r.iter().map(v).collect()).collect();
    let x0: Vec<f64> = lp.x0.iter().map(v).collect();
    let mut routing = 0.0;
    for i in 0..inst.ap_count() {
        routing += inst.horizon as f64 * inst.route_cost_cloud(i) * x0[i];
        for j in 0..inst.en_count() {
            routing += inst.horizon as f64 * inst.route_cost_edge(i, j) * x[i][j];
        }
    }
    Ok((routing, shortfall, x, x0))
}

/// Static baseline by classic two-stage column-and-constraint generation.
pub fn solve_saro(inst: &Instance, spec: &UncertaintySpec, cfg: &RodConfig) -> Result<RodResult> {
    cfg.validate()?;
    if !matches!(spec, UncertaintySpec::Sus(_)) {
        return Err(Error::Unsupported("the static baseline needs a static uncertainty set".into()));
    }
    let started = Instant::now();
    let map = spec.affine_map(&inst.forecast)?;
    let budget = spec.budget();
    let (g1, lambda1) = extreme_total_demand(spec, &inst.forecast)?;
    let mut pool = vec![ScenarioEntry { g: g1, demand: lambda1 }];
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best: Option<(SaroPlan, Candidate)> = None;
    let mut outer = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let penalty = vec![vec![saro_penalty(inst); inst.horizon]; inst.ap_count()];

    for k in 1..=cfg.max_outer {
        let clock = Instant::now();
        let demands: Vec<Matrix> = pool.iter().map(|p| p.demand.clone()).collect();
        let master = build_saro_master(inst, &demands)?;
        let res = solve_checked(&master.model, &cfg.solver).map_err(|e| e.context(format!("static master {k}")))?;
        lb = lb.max(res.bound);
        let plan = master.extract(&res.values);

        let (short, g_short) = saro_worst(inst, &plan, &map, budget, false, &cfg.solver)?;
        let (next, raw_ub) = if short > 1e-6 {
            (g_short, None)
        } else {
            let (worst_cost, g) = saro_worst(inst, &plan, &map, budget, true, &cfg.solver)?;
            let lambda = spec.realize(&inst.forecast, &g)?;
            let (_, shortfall, _, _) = saro_route(inst, &plan, &lambda, &penalty, &cfg.solver)?;
            if shortfall.iter().flatten().any(|&s| s > 1e-6) {
                (g, None)
            } else {
                let upper = plan.cost(inst) + worst_cost;
                if upper < ub {
                    ub = upper;
                    best = Some((plan.clone(), g.clone()));
                }
                (g, Some(upper))
            }
        };
        let gap = relative_gap(lb, ub);
        outer.push(IterationRecord {
            index: k,
            lb,
            ub,
            gap,
            raw_lb: res.objective,
            raw_ub,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            scenario_digest: next.digest(),
        });
        info!("static k={k} LB={lb:.9} UB={ub:.9} gap={gap:.3e}");
        if gap <= cfg.eps_outer {
            converged = true;
            break;
        }
        if pool.iter().any(|p| p.g == next) {
            diagnostics.push(format!("scenario at k={k} is already in the pool; declaring convergence with gap {gap:.3e}"));
            converged = best.is_some();
            break;
        }
        let demand = spec.realize(&inst.forecast, &next)?;
        pool.push(ScenarioEntry { g: next, demand });
    }
    if !converged {
        diagnostics.push(format!("outer iteration cap {} reached", cfg.max_outer));
    }
    let (plan, g) = best.ok_or_else(|| Error::Model("static baseline found no plan feasible for every scenario".into()))?;
    let lambda = spec.realize(&inst.forecast, &g)?;
    let (_, _, x, x0) = saro_route(inst, &plan, &lambda, &penalty, &cfg.solver)?;
    let fs = plan.first_stage(inst.horizon);
    let recourse = plan.recourse_plan(inst, &x, &x0);
    let breakdown = inst.cost_breakdown(&fs, &recourse)?;
    Ok(RodResult {
        model: "saro".into(),
        objective: ub,
        lower_bound: lb,
        gap: relative_gap(lb, ub),
        converged,
        first_stage: fs,
        static_plan: Some(plan),
        pool,
        outer,
        inner: Vec::new(),
        breakdown: Some(breakdown),
        worst_recourse: Some(recourse),
        diagnostics,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
