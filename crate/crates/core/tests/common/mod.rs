#![allow(dead_code)]

use rodplan::instance::{CostSchedule, Instance, Matrix, Topology};
use rodplan::scenario::{generate, ScenarioConfig, SetKind};
use rodplan::uncertainty::{SusSpec, UncertaintySpec};

/// Uniform hand instance: slot length 1, edge prices a/p/e = 0.05/0.1/0.2,
/// cloud 0.01/0.06/0.1, demand 100 per area-period with static deviation 20
/// and budget 1.
pub fn hand(i_n: usize, j_n: usize, t_n: usize) -> Instance {
    let jt = |v: f64| vec![vec![v; t_n]; j_n];
    let forecast = vec![vec![100.0; t_n]; i_n];
    Instance {
        topology: Topology {
            ap_count: i_n,
            en_count: j_n,
            delay_edge: vec![vec![5.0; j_n]; i_n],
            delay_cloud: vec![50.0; i_n],
            hops_edge: vec![vec![1; j_n]; i_n],
            hops_cloud: vec![3; i_n],
        },
        costs: CostSchedule {
            slot_length: 1.0,
            reserve_price_edge: jt(0.1),
            reserve_price_cloud: vec![0.06; t_n],
            buy_price_edge: jt(0.2),
            buy_price_cloud: vec![0.1; t_n],
            sell_price_edge: jt(0.05),
            sell_price_cloud: vec![0.01; t_n],
            install_cost: jt(0.1),
            storage_cost: jt(0.2),
            download_en: (0..j_n)
                .map(|m| (0..j_n).map(|j| vec![if m == j { 0.0 } else { 0.05 }; t_n]).collect())
                .collect(),
            download_cloud: jt(0.2),
            bandwidth_unit: 0.02,
            request_size: 0.02,
            resource_per_request: 0.02,
            delay_penalty: 0.0001,
            capacity: vec![32.0; j_n],
            initial_placement: vec![false; j_n],
        },
        horizon: t_n,
        forecast: forecast.clone(),
        uncertainty: UncertaintySpec::Sus(SusSpec {
            deviation: vec![vec![20.0; t_n]; i_n],
            budget: 1,
            clip_negative: false,
        }),
    }
}

pub fn zeros(i_n: usize, t_n: usize) -> Matrix {
    vec![vec![0.0; t_n]; i_n]
}

/// Seeded generated instance inside the exhaustive-oracle envelope
/// (I <= 3, J <= 2, T <= 2, Γ <= 1).
pub fn tiny(seed: u64) -> Instance {
    let ap = 2 + (seed % 2) as usize;
    let en = 1 + (seed / 2 % 2) as usize;
    let kind = if seed % 3 == 0 { SetKind::Sus } else { SetKind::Dus };
    generate(&ScenarioConfig::tiny(ap, en, 2, 1, kind, seed)).unwrap().instance
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}
