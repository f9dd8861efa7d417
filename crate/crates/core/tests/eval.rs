mod common;

use rodplan::eval::{monte_carlo_eval, sample_trajectories, EvalReport, Policy};
use rodplan::instance::FirstStage;
use rodplan::models::reservation_cost;
use rodplan::rod::{solve_rod, solve_saro, RodConfig};
use rodplan::solver::SolveParams;

#[test]
fn no_demand_and_no_resale_costs_the_reservation() {
    let mut inst = common::hand(2, 1, 2);
    inst.costs.sell_price_edge = vec![vec![0.0; 2]];
    inst.costs.sell_price_cloud = vec![0.0; 2];
    let mut fs = FirstStage::zeros(1, 2);
    fs.edge = vec![vec![4.0, 2.0]];
    fs.cloud = vec![1.0, 0.0];
    let rep = monte_carlo_eval(&inst, "fixed", &Policy::Adaptive(&fs), &[common::zeros(2, 2)], &SolveParams::default()).unwrap();
    let c1 = reservation_cost(&inst, &fs);
    assert!((c1 - 0.66).abs() < 1e-12);
    assert!((rep.expected_total - c1).abs() < 1e-9, "{}", rep.expected_total);
    assert_eq!(rep.expected_penalty, 0.0);
}

#[test]
fn forecast_trajectory_reproduces_the_nominal_objective() {
    let mut inst = common::hand(2, 2, 2);
    inst.uncertainty = inst.uncertainty.with_budget(0);
    let cfg = RodConfig::default();
    let r = solve_rod(&inst, &cfg).unwrap();
    let rep = monte_carlo_eval(&inst, "daro", &Policy::of(&r), &[inst.forecast.clone()], &cfg.solver).unwrap();
    assert!(common::rel_diff(rep.expected_total, r.objective) <= 1e-9, "{} vs {}", rep.expected_total, r.objective);
}

#[test]
fn static_plan_is_evaluated_with_its_fixed_routing() {
    let inst = common::hand(2, 1, 2);
    let cfg = RodConfig::default();
    let r = solve_saro(&inst, &inst.uncertainty, &cfg).unwrap();
    let traj = sample_trajectories(&inst.uncertainty, &inst.forecast, 5, 1).unwrap();
    let rep = monte_carlo_eval(&inst, "saro", &Policy::of(&r), &traj, &cfg.solver).unwrap();
    assert_eq!(rep.samples.len(), 5);
    assert!(rep.samples.iter().all(|s| s.total >= s.breakdown.total - 1e-12 && s.penalty >= 0.0));
    assert!(rep.worst_total >= rep.expected_total);
}

#[test]
fn static_samples_stay_in_the_band() {
    let inst = common::hand(3, 1, 4);
    let traj = sample_trajectories(&inst.uncertainty, &inst.forecast, 50, 7).unwrap();
    assert_eq!(traj.len(), 50);
    assert!(traj.iter().flatten().flatten().all(|&x| (80.0..=120.0).contains(&x)));
}

#[test]
fn dynamic_samples_are_clipped_and_seeded() {
    let inst = common::tiny(1);
    let a = sample_trajectories(&inst.uncertainty, &inst.forecast, 20, 3).unwrap();
    let b = sample_trajectories(&inst.uncertainty, &inst.forecast, 20, 3).unwrap();
    let c = sample_trajectories(&inst.uncertainty, &inst.forecast, 20, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.iter().flatten().flatten().all(|&x| x >= 0.0));
}

#[test]
fn evaluation_is_deterministic_and_exports_every_sample() {
    let inst = common::hand(2, 1, 2);
    let cfg = RodConfig::default();
    let r = solve_rod(&inst, &cfg).unwrap();
    let traj = sample_trajectories(&inst.uncertainty, &inst.forecast, 4, 9).unwrap();
    let run = || monte_carlo_eval(&inst, "daro", &Policy::of(&r), &traj, &cfg.solver).unwrap();
    let (x, y) = (run(), run());
    assert_eq!(x, y);
    let report = EvalReport { seed: 9, trajectories: 4, policies: vec![x] };
    let mut buf = Vec::new();
    report.write_samples_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("policy,trajectory,total,payment,adjustment,penalty"));
}

#[test]
fn trajectory_shape_is_checked() {
    let inst = common::hand(2, 1, 2);
    let fs = FirstStage::zeros(1, 2);
    let err = monte_carlo_eval(&inst, "x", &Policy::Adaptive(&fs), &[common::zeros(2, 3)], &SolveParams::default());
    assert!(matches!(err, Err(rodplan::Error::Dimension(_))));
}
