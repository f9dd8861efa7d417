mod common;

use rodplan::instance::{FirstStage, Instance};
use rodplan::oracle::{exact_full, exact_q};
use rodplan::rod::{
    inner_loop, solve_baseline, solve_det, solve_rod, solve_rod_with, solve_saro, Baseline, IterationRecord, RodConfig,
};
use rodplan::uncertainty::{Candidate, DusSpec, SusSpec, UncertaintySpec, DEFAULT_CANDIDATE_CAP};

fn nondecreasing(xs: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = xs.collect();
    v.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
}

fn disciplined(log: &[IterationRecord]) -> bool {
    nondecreasing(log.iter().map(|r| r.lb)) && nondecreasing(log.iter().map(|r| -r.ub))
}

#[test]
fn zero_budget_is_det_in_one_round() {
    let mut inst = common::tiny(4);
    inst.uncertainty = inst.uncertainty.with_budget(0);
    let cfg = RodConfig::default();
    let rod = solve_rod(&inst, &cfg).unwrap();
    // seeded residuals still propagate with no driver
    let nominal = inst.uncertainty.realize(&inst.forecast, &Candidate::zeros(inst.ap_count(), inst.horizon)).unwrap();
    let det = solve_det(&inst, &nominal, &cfg).unwrap();
    assert_eq!(rod.outer.len(), 1);
    assert!(rod.converged);
    assert!(common::rel_diff(rod.objective, det.objective) <= 1e-9, "{} vs {}", rod.objective, det.objective);
}

#[test]
fn memoryless_dynamic_set_equals_static_set() {
    let sus = common::hand(2, 1, 2);
    let mut dus = sus.clone();
    dus.uncertainty = UncertaintySpec::Dus(DusSpec {
        lag: 1,
        ar: vec![vec![0.0]; 2],
        mixing: vec![vec![20.0, 0.0], vec![0.0, 20.0]],
        seed: vec![vec![0.0]; 2],
        budget: 1,
        clip_negative: false,
    });
    let cfg = RodConfig::default();
    let (a, b) = (solve_rod(&sus, &cfg).unwrap(), solve_rod(&dus, &cfg).unwrap());
    assert!(common::rel_diff(a.objective, b.objective) <= 2e-3, "{} vs {}", a.objective, b.objective);
    let full = exact_full(&sus, &sus.uncertainty, DEFAULT_CANDIDATE_CAP, &cfg.solver).unwrap();
    assert!(common::rel_diff(a.objective, full.objective) <= 1e-3);
}

#[test]
fn inner_loop_matches_enumeration() {
    let inst = common::hand(2, 1, 2);
    let cfg = RodConfig::default();
    let mut fs = FirstStage::zeros(1, 2);
    fs.edge = vec![vec![3.0, 1.0]];
    fs.cloud = vec![2.0, 5.0];
    let start = Candidate::zeros(2, 2);
    let run = inner_loop(&inst, &fs, &inst.uncertainty, &start, &cfg).unwrap();
    let q = exact_q(&inst, &fs, &inst.uncertainty, DEFAULT_CANDIDATE_CAP, &cfg.solver).unwrap();
    assert!((run.value() - q.value).abs() <= 1e-3f64.max(1e-6), "{} vs {}", run.value(), q.value);
    assert!(run.converged, "{}", run.termination);
    assert!(disciplined(&run.iterations));
}

#[test]
fn bounds_move_monotonically() {
    for seed in [1, 2, 5] {
        let r = solve_rod(&common::tiny(seed), &RodConfig::default()).unwrap();
        assert!(disciplined(&r.outer), "seed {seed}");
        assert!(r.inner.iter().all(|run| disciplined(&run.iterations)), "seed {seed}");
        assert!(r.lower_bound <= r.objective + 1e-9);
    }
}

#[test]
fn static_policy_costs_at_least_the_adaptive_one() {
    let inst = common::hand(2, 2, 2);
    let cfg = RodConfig::default();
    let saro = solve_saro(&inst, &inst.uncertainty, &cfg).unwrap();
    let daro = solve_baseline(&inst, Baseline::DaroSus, &inst.uncertainty, &cfg).unwrap();
    assert!(saro.static_plan.is_some());
    assert!(saro.objective >= daro.objective * (1.0 - 2e-3), "{} < {}", saro.objective, daro.objective);
}

#[test]
fn static_policy_without_demand_is_free() {
    let mut inst = common::hand(2, 1, 2);
    inst.forecast = common::zeros(2, 2);
    inst.uncertainty = UncertaintySpec::Sus(SusSpec { deviation: common::zeros(2, 2), budget: 1, clip_negative: false });
    let r = solve_saro(&inst, &inst.uncertainty, &RodConfig::default()).unwrap();
    assert!(r.objective.abs() < 1e-9);
}

#[test]
fn baselines_check_the_set_kind() {
    let inst = common::tiny(1);
    assert!(matches!(inst.uncertainty, UncertaintySpec::Dus(_)));
    let cfg = RodConfig::default();
    assert!(solve_baseline(&inst, Baseline::Saro, &inst.uncertainty, &cfg).is_err());
    assert!(solve_baseline(&inst, Baseline::DaroSus, &inst.uncertainty, &cfg).is_err());
    let sus = common::hand(1, 1, 1);
    assert!(solve_baseline(&sus, Baseline::DaroDus, &sus.uncertainty, &cfg).is_err());
    assert_eq!("daro-dus".parse::<Baseline>().unwrap(), Baseline::DaroDus);
    assert!("aro".parse::<Baseline>().is_err());
}

#[test]
fn config_is_validated() {
    let inst: Instance = common::hand(1, 1, 1);
    for cfg in [
        RodConfig { eps_outer: 0.0, ..RodConfig::default() },
        RodConfig { eps_inner: -1.0, ..RodConfig::default() },
        RodConfig { max_outer: 0, ..RodConfig::default() },
        RodConfig { time_limit: Some(0.0), ..RodConfig::default() },
    ] {
        assert!(cfg.validate().is_err());
        assert!(solve_rod(&inst, &cfg).is_err());
    }
}

#[test]
fn iteration_log_lines() {
    let r = solve_rod(&common::tiny(2), &RodConfig::default()).unwrap();
    let log = r.iteration_log();
    let outer = log.iter().filter(|l| l["level"] == "outer").count();
    assert_eq!(outer, r.outer.len());
    assert_eq!(log.len(), outer + r.inner.iter().map(|i| i.iterations.len()).sum::<usize>());
    for line in &log {
        for key in ["LB", "UB", "gap", "wall_ms", "scenario_digest"] {
            assert!(line.get(key).is_some(), "{line}");
        }
        assert!(line.get("k").is_some() || line.get("r").is_some());
    }
    assert_eq!(log.last().unwrap()["level"], "outer");
}

#[test]
fn runs_are_deterministic() {
    let inst = common::tiny(5);
    let cfg = RodConfig::default();
    let (a, b) = (solve_rod(&inst, &cfg).unwrap(), solve_rod(&inst, &cfg).unwrap());
    let bounds = |r: &rodplan::rod::RodResult| r.outer.iter().map(|o| (o.lb, o.ub)).collect::<Vec<_>>();
    assert_eq!(bounds(&a), bounds(&b));
    assert_eq!(a.first_stage, b.first_stage);
}

#[test]
fn explicit_spec_overrides_the_instance() {
    let inst = common::hand(2, 1, 2);
    let cfg = RodConfig::default();
    let wide = inst.uncertainty.with_budget(2);
    let (narrow, broad) = (solve_rod(&inst, &cfg).unwrap(), solve_rod_with(&inst, &wide, &cfg).unwrap());
    assert!(broad.objective >= narrow.objective * (1.0 - 2e-3));
}
