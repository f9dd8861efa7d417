mod common;

use rodplan::instance::{load_instance, FirstStage, Instance, RecoursePlan, Rule, Traces};
use rodplan::scenario::{generate, ScenarioConfig};
use rodplan::Error;

#[test]
fn smallest_instance_round_trips_through_json() {
    let inst = common::hand(1, 1, 1);
    let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
    assert_eq!(back, inst);
    assert_eq!(back.forecast, vec![vec![100.0]]);
    assert_eq!(back.costs.reserve_price_edge, vec![vec![0.1]]);
}

#[test]
fn sell_above_reserve_is_rejected() {
    let mut inst = common::hand(1, 1, 1);
    inst.costs.sell_price_edge[0][0] = 0.15;
    let err = Instance::from_json(&inst.to_json().unwrap()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    assert!(err.to_string().contains("price ordering"), "{err}");
}

#[test]
fn shape_and_sign_errors_are_listed() {
    let mut inst = common::hand(2, 1, 2);
    inst.forecast[1].pop();
    inst.costs.capacity[0] = 0.0;
    inst.topology.hops_cloud[0] = 0;
    let v = inst.violations();
    assert!(v.iter().any(|m| m.contains("forecast")));
    assert!(v.iter().any(|m| m.contains("capacity")));
    assert!(v.iter().any(|m| m.contains("hop")));
}

#[test]
fn full_scale_instance_loads() {
    let g = generate(&ScenarioConfig { history: 400, seed: 3, ..ScenarioConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    g.instance.save(&path).unwrap();
    let inst = load_instance(&path).unwrap();
    assert_eq!((inst.ap_count(), inst.en_count()), (20, 10));
    assert_eq!(inst.uncertainty.budget(), 5);
    let c = &inst.costs;
    assert_eq!((c.delay_penalty, c.bandwidth_unit, c.request_size, c.resource_per_request), (0.0001, 0.02, 0.02, 0.02));
}

#[test]
fn zero_plan_costs_nothing() {
    let inst = common::hand(2, 2, 2);
    let b = inst.cost_breakdown(&FirstStage::zeros(2, 2), &RecoursePlan::zeros(2, 2, 2)).unwrap();
    assert_eq!(b.total, 0.0);
    assert_eq!(b.payment(), 0.0);
}

#[test]
fn reservation_term_alone() {
    let inst = common::hand(1, 1, 1);
    let mut fs = FirstStage::zeros(1, 1);
    fs.edge[0][0] = 10.0;
    let b = inst.cost_breakdown(&fs, &RecoursePlan::zeros(1, 1, 1)).unwrap();
    assert!((b.c1_reserve - 1.0).abs() < 1e-12);
    assert!((b.total - 1.0).abs() < 1e-12);
}

#[test]
fn adjustment_nets_buy_and_sell() {
    let inst = common::hand(1, 1, 1);
    let mut rp = RecoursePlan::zeros(1, 1, 1);
    rp.buy_edge[0][0] = 5.0;
    rp.sell_edge[0][0] = 2.0;
    let b = inst.cost_breakdown(&FirstStage::zeros(1, 1), &rp).unwrap();
    assert!((b.c2_adjust - 0.9).abs() < 1e-12);
    assert_eq!(b.c1_reserve, 0.0);
}

#[test]
fn breakdown_checks_dimensions() {
    let inst = common::hand(1, 1, 2);
    assert!(matches!(
        inst.cost_breakdown(&FirstStage::zeros(1, 1), &RecoursePlan::zeros(1, 1, 2)),
        Err(Error::Dimension(_))
    ));
}

/// Serve 100 requests at the single edge node: 2 vCPU, installed from the cloud.
fn edge_plan() -> (FirstStage, RecoursePlan) {
    let mut fs = FirstStage::zeros(1, 1);
    fs.edge[0][0] = 2.0;
    let mut rp = RecoursePlan::zeros(1, 1, 1);
    rp.placement[0][0] = 1.0;
    rp.startup[0][0] = 1.0;
    rp.download_cloud[0][0] = 1.0;
    rp.alloc[0][0][0] = 100.0;
    (fs, rp)
}

#[test]
fn hand_built_plan_is_feasible() {
    let inst = common::hand(1, 1, 1);
    let (fs, rp) = edge_plan();
    assert!(inst.validate_recourse(&fs, &rp, &inst.forecast).is_empty());
}

#[test]
fn selling_more_than_reserved_is_flagged() {
    let inst = common::hand(1, 1, 1);
    let (fs, mut rp) = edge_plan();
    rp.sell_edge[0][0] = fs.edge[0][0] + 1.0;
    let v = inst.validate_recourse(&fs, &rp, &inst.forecast);
    assert!(v.iter().any(|x| x.rule == Rule::SellBackEdge), "{v:?}");
}

#[test]
fn edge_resources_need_placement() {
    let inst = common::hand(1, 1, 1);
    let (fs, mut rp) = edge_plan();
    rp.placement[0][0] = 0.0;
    let v = inst.validate_recourse(&fs, &rp, &inst.forecast);
    assert!(v.iter().any(|x| x.rule == Rule::EdgeCapacity), "{v:?}");
}

#[test]
fn unserved_demand_is_flagged() {
    let inst = common::hand(1, 1, 1);
    let (fs, mut rp) = edge_plan();
    rp.alloc[0][0][0] = 90.0;
    let v = inst.validate_recourse(&fs, &rp, &inst.forecast);
    assert!(v.iter().any(|x| x.rule == Rule::DemandCoverage && (x.amount - 10.0).abs() < 1e-9), "{v:?}");
}

#[test]
fn traces_round_trip_through_csv() {
    let tr = Traces { periods: vec![0, 1, 2], series: vec![vec![1.0, 2.5, 3.0], vec![0.0, 4.0, 8.25]] };
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    assert_eq!(Traces::read_csv(buf.as_slice()).unwrap(), tr);
}
