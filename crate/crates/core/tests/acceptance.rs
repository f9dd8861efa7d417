//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances are pinned below.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rodplan::estimation::{fit_traces, DEFAULT_CYCLES};
use rodplan::instance::{CostSchedule, Instance, RecoursePlan};
use rodplan::models::{build_inner_mp, build_innermost_lp, BinaryPoint, CutPoint, ProductSplit};
use rodplan::oracle::{exact_full, exact_q, random_first_stage};
use rodplan::rod::{inner_loop, recourse_at, solve_det, solve_rod, IterationRecord, RodConfig, RodResult};
use rodplan::scenario::{generate, ScenarioConfig, SetKind};
use rodplan::solver::{dualize, solve, SolveParams};
use rodplan::uncertainty::{candidate_count, enumerate_candidates, Candidate, UncertaintySpec, DEFAULT_CANDIDATE_CAP};

const EPS1: f64 = 1e-3;
const EPS2: f64 = 1e-3;
const TINY_COUNT: u64 = 20;
const POINTS_PER_INSTANCE: usize = 5;
const MAX_CANDIDATES: u128 = 81;
const DUALITY_LPS: usize = 100;
const DUALITY_TOL: f64 = 1e-8;
const CUT_TOL: f64 = 1e-6;
const COLLAPSE_TOL: f64 = 1e-9;
const ARBITRAGE_TOL: f64 = 1e-6;
const PHI_REL: f64 = 0.05;
const A_ABS: f64 = 0.05;
const SIGMA_FROB: f64 = 0.10;
const MEDIUM_SECONDS: f64 = 600.0;
/// Solver gap for the medium run; the bounds ROD compares are proven
/// bounds, so this only trades solve time against iterations.
const MEDIUM_SOLVER_GAP: f64 = 2.5e-4;

fn tiny(seed: u64) -> Instance {
    let ap = 2 + (seed % 2) as usize;
    let en = 1 + (seed / 2 % 2) as usize;
    let kind = if seed % 3 == 0 { SetKind::Sus } else { SetKind::Dus };
    generate(&ScenarioConfig::tiny(ap, en, 2, 1, kind, seed)).unwrap().instance
}

fn config() -> RodConfig {
    RodConfig { eps_outer: EPS1, eps_inner: EPS2, ..RodConfig::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("criterion {n:>2} {:<4} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

/// Index of the first iteration where a bound moved the wrong way.
fn bound_violation(log: &[IterationRecord]) -> Option<usize> {
    let slack = |x: f64| 1e-9 * x.abs().max(1.0);
    log.windows(2).position(|w| w[1].lb < w[0].lb - slack(w[0].lb) || w[1].ub > w[0].ub + slack(w[0].ub))
}

fn arbitrage(inst: &Instance, plan: &RecoursePlan) -> f64 {
    let c: &CostSchedule = &inst.costs;
    let mut worst: f64 = 0.0;
    for j in 0..inst.en_count() {
        for t in 0..inst.horizon {
            if c.buy_price_edge[j][t] > c.sell_price_edge[j][t] {
                worst = worst.max(plan.buy_edge[j][t].min(plan.sell_edge[j][t]));
            }
        }
    }
    for t in 0..inst.horizon {
        if c.buy_price_cloud[t] > c.sell_price_cloud[t] {
            worst = worst.max(plan.buy_cloud[t].min(plan.sell_cloud[t]));
        }
    }
    worst
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut report = Report { failed: 0 };
    let cfg = config();
    let params = SolveParams::default();
    let instances: Vec<Instance> = (0..TINY_COUNT).map(tiny).collect();
    let mut logs: Vec<(String, Vec<IterationRecord>)> = Vec::new();
    let mut arbitrage_worst: f64 = 0.0;
    let mut plans_checked = 0usize;
    let keep = |logs: &mut Vec<(String, Vec<IterationRecord>)>, tag: String, r: &RodResult| {
        logs.push((format!("{tag} outer"), r.outer.clone()));
        for (k, run) in r.inner.iter().enumerate() {
            logs.push((format!("{tag} inner {k}"), run.iterations.clone()));
        }
    };

    // 1. full problem against the deterministic equivalent
    let mut rods = Vec::new();
    let mut worst1: f64 = 0.0;
    let mut envelope = true;
    for (s, inst) in instances.iter().enumerate() {
        envelope &= candidate_count(inst.ap_count(), inst.horizon, inst.uncertainty.budget()) <= MAX_CANDIDATES;
        let r = solve_rod(inst, &cfg).unwrap();
        let full = exact_full(inst, &inst.uncertainty, DEFAULT_CANDIDATE_CAP, &params).unwrap();
        worst1 = worst1.max(rel(r.objective, full.objective));
        if let Some(plan) = &r.worst_recourse {
            arbitrage_worst = arbitrage_worst.max(arbitrage(inst, plan));
            plans_checked += 1;
        }
        keep(&mut logs, format!("tiny {s}"), &r);
        rods.push(r);
    }
    let tol1 = EPS1.max(1e-6);
    report.line(
        1,
        "ROD equals exhaustive optimum",
        envelope && worst1 <= tol1,
        format!("{TINY_COUNT} instances, worst relative diff {worst1:.2e} (tol {tol1:.0e})"),
    );

    // 2. inner value at random reservations against enumeration
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst2: f64 = 0.0;
    for (s, inst) in instances.iter().enumerate() {
        for p in 0..POINTS_PER_INSTANCE {
            let fs = random_first_stage(inst, &mut rng);
            let start = Candidate::zeros(inst.ap_count(), inst.horizon);
            let run = inner_loop(inst, &fs, &inst.uncertainty, &start, &cfg).unwrap();
            let q = exact_q(inst, &fs, &inst.uncertainty, DEFAULT_CANDIDATE_CAP, &params).unwrap();
            worst2 = worst2.max((run.value() - q.value).abs());
            logs.push((format!("tiny {s} point {p}"), run.iterations.clone()));
            let lambda = inst.uncertainty.realize(&inst.forecast, &q.argmax).unwrap();
            let (_, plan) = recourse_at(inst, &fs, &lambda, &params).unwrap();
            arbitrage_worst = arbitrage_worst.max(arbitrage(inst, &plan));
            plans_checked += 1;
        }
    }
    let tol2 = EPS2.max(1e-6);
    report.line(
        2,
        "inner loop equals exhaustive worst case",
        worst2 <= tol2,
        format!("{} reservations, worst abs diff {worst2:.2e} (tol {tol2:.0e})", TINY_COUNT as usize * POINTS_PER_INSTANCE),
    );

    // 4. strong duality on random innermost LPs
    let mut worst4: f64 = 0.0;
    for k in 0..DUALITY_LPS {
        let inst = &instances[k % instances.len()];
        let all = enumerate_candidates(inst.ap_count(), inst.horizon, inst.uncertainty.budget(), DEFAULT_CANDIDATE_CAP).unwrap();
        let fs = random_first_stage(inst, &mut rng);
        let pick = |rng: &mut ChaCha8Rng| inst.uncertainty.realize(&inst.forecast, &all[rng.random_range(0..all.len())]).unwrap();
        let (l1, l2) = (pick(&mut rng), pick(&mut rng));
        let point = BinaryPoint::from_plan(&recourse_at(inst, &fs, &l1, &params).unwrap().1);
        let lp = build_innermost_lp(inst, &fs, &point, &l2).unwrap();
        let primal = solve(&lp.model, &params).unwrap().objective;
        let dual = solve(&dualize(&lp.model).unwrap().model, &params).unwrap().objective;
        worst4 = worst4.max((primal - dual).abs() / (1.0 + primal.abs()));
    }
    report.line(
        4,
        "strong duality on innermost LPs",
        worst4 <= DUALITY_TOL,
        format!("{DUALITY_LPS} LPs, worst |p-d|/(1+|p|) {worst4:.2e} (tol {DUALITY_TOL:.0e})"),
    );

    // 5. every cut, pinned at every candidate, reproduces the innermost LP
    let mut worst5: f64 = 0.0;
    let mut checks5 = 0usize;
    for (inst, r) in instances.iter().zip(&rods) {
        let fs = &r.first_stage;
        let spec = &inst.uncertainty;
        let run = inner_loop(inst, fs, spec, &Candidate::zeros(inst.ap_count(), inst.horizon), &cfg).unwrap();
        let map = spec.affine_map(&inst.forecast).unwrap();
        let all = enumerate_candidates(inst.ap_count(), inst.horizon, spec.budget(), DEFAULT_CANDIDATE_CAP).unwrap();
        for point in &run.cuts {
            let cut = CutPoint::new(inst, fs, point.clone()).unwrap();
            let base = build_inner_mp(inst, std::slice::from_ref(&cut), &map, spec.budget(), ProductSplit::default()).unwrap();
            for g in &all {
                let mut mp = base.clone();
                mp.fix_drivers(g).unwrap();
                let tau = solve(&mp.model, &params).unwrap().objective;
                let lambda = spec.realize(&inst.forecast, g).unwrap();
                let lp = solve(&build_innermost_lp(inst, fs, point, &lambda).unwrap().model, &params).unwrap().objective;
                worst5 = worst5.max((tau - lp).abs());
                checks5 += 1;
            }
        }
    }
    report.line(
        5,
        "cut expression is exact at every candidate",
        checks5 > 0 && worst5 <= CUT_TOL,
        format!("{checks5} cut/candidate pairs, worst abs diff {worst5:.2e} (tol {CUT_TOL:.0e})"),
    );

    // 6. budget monotonicity on one instance
    let inst6 = instances.iter().find(|i| i.ap_count() >= 3).unwrap();
    let objs: Vec<f64> = (0..=2)
        .map(|b| {
            let mut inst = inst6.clone();
            inst.uncertainty = inst.uncertainty.with_budget(b);
            let r = solve_rod(&inst, &cfg).unwrap();
            keep(&mut logs, format!("budget {b}"), &r);
            r.objective
        })
        .collect();
    let ok6 = objs.windows(2).all(|w| w[1] >= w[0] - 2.0 * EPS1 * w[0].abs());
    report.line(6, "objective nondecreasing in budget", ok6, format!("budget 0,1,2 -> {objs:.6?} (slack 2*eps1)"));

    // 7. zero budget collapses to the deterministic model at the forecast
    let mut worst7: f64 = 0.0;
    let mut count7 = 0usize;
    for inst in &instances {
        let mut inst = inst.clone();
        if let UncertaintySpec::Dus(d) = &mut inst.uncertainty {
            d.seed.iter_mut().flatten().for_each(|x| *x = 0.0);
        }
        inst.uncertainty = inst.uncertainty.with_budget(0);
        let r = solve_rod(&inst, &cfg).unwrap();
        let det = solve_det(&inst, &inst.forecast, &cfg).unwrap();
        worst7 = worst7.max(rel(r.objective, det.objective));
        count7 += 1;
        keep(&mut logs, format!("collapse {count7}"), &r);
    }
    report.line(
        7,
        "zero budget equals the deterministic model",
        worst7 <= COLLAPSE_TOL,
        format!("{count7} instances, worst relative diff {worst7:.2e} (tol {COLLAPSE_TOL:.0e})"),
    );

    // 9. estimator recovery on synthetic history
    let g = generate(&ScenarioConfig { history: 2000, seed: 99, ..ScenarioConfig::default() }).unwrap();
    let (_, fit) = fit_traces(&g.traces, g.truth.lag(), &DEFAULT_CYCLES).unwrap();
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let phi_err = fit
        .phi
        .iter()
        .zip(&g.truth.phi)
        .map(|(a, b)| norm(&mut a.iter().zip(b).map(|(x, y)| x - y)) / norm(&mut b.iter().copied()))
        .fold(0.0, f64::max);
    let a_err = fit.a.iter().flatten().zip(g.truth.a.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let n = fit.b.len();
    let bbt = |i: usize, k: usize| (0..n).map(|m| fit.b[i][m] * fit.b[k][m]).sum::<f64>();
    let diff = norm(&mut (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| bbt(i, k) - g.truth.sigma[i][k]));
    let sigma_err = diff / norm(&mut g.truth.sigma.iter().flatten().copied());
    report.line(
        9,
        "estimator recovers the generating process",
        phi_err <= PHI_REL && a_err <= A_ABS && sigma_err <= SIGMA_FROB,
        format!(
            "{n} areas, 2000 periods: phi rel {phi_err:.3} (tol {PHI_REL}), A abs {a_err:.3} (tol {A_ABS}), BB' frob {sigma_err:.3} (tol {SIGMA_FROB})"
        ),
    );

    // 10. medium instance within the time budget
    let medium = generate(&ScenarioConfig {
        ap_count: 10,
        en_count: 5,
        horizon: 6,
        lag: 1,
        budget: 3,
        kind: SetKind::Dus,
        seed: 7,
        ..ScenarioConfig::default()
    })
    .unwrap()
    .instance;
    let mut mcfg = config();
    mcfg.solver.rel_gap = MEDIUM_SOLVER_GAP;
    mcfg.time_limit = Some(MEDIUM_SECONDS);
    let clock = Instant::now();
    let r10 = solve_rod(&medium, &mcfg);
    let secs = clock.elapsed().as_secs_f64();
    match &r10 {
        Ok(r) => {
            keep(&mut logs, "medium".into(), r);
            if let Some(plan) = &r.worst_recourse {
                arbitrage_worst = arbitrage_worst.max(arbitrage(&medium, plan));
                plans_checked += 1;
            }
            report.line(
                10,
                "medium instance converges in time",
                r.converged && r.gap <= EPS1 && secs <= MEDIUM_SECONDS,
                format!("I=10 J=5 T=6 budget 3: gap {:.2e} after {} outer rounds in {secs:.1} s (limit {MEDIUM_SECONDS} s)", r.gap, r.outer.len()),
            );
        }
        Err(e) => report.line(10, "medium instance converges in time", false, format!("error after {secs:.1} s: {e}")),
    }

    // 3 and 8 collect over every run above
    let bad3: Vec<String> =
        logs.iter().filter_map(|(tag, log)| bound_violation(log).map(|k| format!("{tag} at step {}", k + 2))).collect();
    report.line(
        3,
        "bounds monotone in every logged run",
        bad3.is_empty(),
        if bad3.is_empty() { format!("{} runs", logs.len()) } else { format!("violations: {}", bad3.join("; ")) },
    );
    report.line(
        8,
        "no simultaneous buy and sell",
        arbitrage_worst <= ARBITRAGE_TOL,
        format!("{plans_checked} recourse plans, worst min(buy, sell) {arbitrage_worst:.2e} (tol {ARBITRAGE_TOL:.0e})"),
    );

    println!("acceptance: {} failed, {:.1} s", report.failed, started.elapsed().as_secs_f64());
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
