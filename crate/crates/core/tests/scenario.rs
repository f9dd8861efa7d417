use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rodplan::estimation::{fit_traces, ArFit, DEFAULT_CYCLES};
use rodplan::instance::Traces;
use rodplan::scenario::{
    designate, gen_costs, gen_demand_traces, gen_topology, generate, Network, PathCost, ScenarioConfig, SetKind,
    TopologyConfig, CAPACITY_CHOICES,
};

#[test]
fn two_node_path() {
    let net = Network { node_count: 2, edges: vec![(0, 1, 5.0)] };
    assert_eq!(net.shortest_from(0)[1], Some(PathCost { delay: 5.0, hops: 1 }));
}

#[test]
fn triangle_takes_the_detour() {
    let net = Network { node_count: 3, edges: vec![(0, 1, 2.0), (1, 2, 2.0), (0, 2, 10.0)] };
    assert_eq!(net.shortest_from(0)[2], Some(PathCost { delay: 4.0, hops: 2 }));
}

#[test]
fn unreachable_node_has_no_path() {
    let net = Network { node_count: 3, edges: vec![(0, 1, 1.0)] };
    assert_eq!(net.shortest_from(0)[2], None);
}

fn simple_paths(net: &Network, at: usize, to: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
    if at == to {
        *best = best.min(acc);
        return;
    }
    for &(a, b, w) in &net.edges {
        let next = if a == at { b } else if b == at { a } else { continue };
        if !seen[next] {
            seen[next] = true;
            simple_paths(net, next, to, seen, acc + w, best);
            seen[next] = false;
        }
    }
}

#[test]
fn dijkstra_matches_path_enumeration() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::barabasi_albert(9, 2, (2.0, 10.0), &mut rng).unwrap();
        for s in 0..net.node_count {
            let dist = net.shortest_from(s);
            for t in 0..net.node_count {
                let mut seen = vec![false; net.node_count];
                seen[s] = true;
                let mut best = f64::INFINITY;
                simple_paths(&net, s, t, &mut seen, 0.0, &mut best);
                assert!((dist[t].unwrap().delay - best).abs() < 1e-9, "seed {seed} {s}->{t}");
            }
        }
    }
}

#[test]
fn ba_graph_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = Network::barabasi_albert(100, 2, (2.0, 10.0), &mut rng).unwrap();
    assert_eq!(net.edges.len(), 3 + 2 * 97);
    assert!(net.degrees().iter().all(|&d| d >= 2));
    assert!(net.edges.iter().all(|&(a, b, w)| a != b && (2.0..=10.0).contains(&w)));
    let mut pairs: Vec<_> = net.edges.iter().map(|&(a, b, _)| (a.min(b), a.max(b))).collect();
    pairs.sort();
    pairs.dedup();
    assert_eq!(pairs.len(), net.edges.len());
    assert!(Network::barabasi_albert(2, 2, (2.0, 10.0), &mut rng).is_err());
}

#[test]
fn designation_follows_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Network::barabasi_albert(30, 2, (2.0, 10.0), &mut rng).unwrap();
    let roles = designate(&net, 5, 3).unwrap();
    let deg = net.degrees();
    let order: Vec<usize> = std::iter::once(roles.hub).chain(roles.aps.iter().copied()).chain(roles.ens.iter().copied()).collect();
    assert!(order.windows(2).all(|w| deg[w[0]] >= deg[w[1]]));
    let mut uniq = order.clone();
    uniq.sort();
    uniq.dedup();
    assert_eq!(uniq.len(), 9);
    assert!(designate(&net, 25, 5).is_err());
}

#[test]
fn generated_topology_is_positive() {
    let top = gen_topology(&TopologyConfig::default(), 20, 10, 5).unwrap();
    assert!(top.delay_edge.iter().flatten().all(|&d| d >= 2.0));
    assert!(top.hops_edge.iter().flatten().all(|&h| h >= 1));
    assert!(top.delay_cloud.iter().all(|&d| d > 50.0));
    assert!(top.hops_cloud.iter().all(|&h| h >= 2));
}

#[test]
fn sampled_prices_are_ordered() {
    let c = gen_costs(20, 10, 6, 9);
    assert!(c.capacity.iter().all(|k| CAPACITY_CHOICES.contains(k)));
    assert!(c.reserve_price_cloud.iter().all(|&p| p == 0.06));
    for j in 0..10 {
        for t in 0..6 {
            assert!(c.sell_price_edge[j][t] <= c.reserve_price_edge[j][t]);
            assert!(c.reserve_price_edge[j][t] <= c.buy_price_edge[j][t]);
            assert!((0.2..=0.3).contains(&c.storage_cost[j][t]));
        }
    }
    for t in 0..6 {
        assert!(c.sell_price_cloud[t] <= c.reserve_price_cloud[t] && c.reserve_price_cloud[t] <= c.buy_price_cloud[t]);
    }
}

#[test]
fn generation_is_deterministic() {
    let cfg = ScenarioConfig { history: 300, seed: 21, ..ScenarioConfig::default() };
    let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
    assert_eq!(a.instance.to_json().unwrap(), b.instance.to_json().unwrap());
    let csv = |t: &Traces| {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        buf
    };
    assert_eq!(csv(&a.traces), csv(&b.traces));
    let other = generate(&ScenarioConfig { seed: 22, ..cfg }).unwrap();
    assert_ne!(a.instance, other.instance);
}

#[test]
fn static_kind_and_budget_check() {
    let g = generate(&ScenarioConfig::tiny(3, 2, 2, 1, SetKind::Sus, 1)).unwrap();
    assert!(matches!(g.instance.uncertainty, rodplan::uncertainty::UncertaintySpec::Sus(_)));
    assert!(generate(&ScenarioConfig::tiny(2, 1, 2, 3, SetKind::Dus, 1)).is_err());
}

#[test]
fn noiseless_trace_is_constant() {
    let truth = ArFit {
        phi: vec![vec![7.0, 0.0, 0.0, 0.0, 0.0]],
        a: vec![vec![0.0]],
        b: vec![vec![0.0]],
        seed: vec![vec![0.0]],
        sigma: vec![vec![0.0]],
        r_squared: Vec::new(),
    };
    let tr = gen_demand_traces(&truth, &DEFAULT_CYCLES, 50, 3).unwrap();
    assert!(tr.series[0].iter().all(|&x| x == 7.0));
}

#[test]
fn traces_reparse_from_csv() {
    let g = generate(&ScenarioConfig { history: 100, ap_count: 3, en_count: 2, budget: 1, seed: 2, ..ScenarioConfig::default() }).unwrap();
    let mut buf = Vec::new();
    g.traces.write_csv(&mut buf).unwrap();
    let back = Traces::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.periods, g.traces.periods);
    for (x, y) in back.series.iter().flatten().zip(g.traces.series.iter().flatten()) {
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
    }
}

#[test]
fn scalar_ar_is_recovered() {
    let truth = ArFit {
        phi: vec![vec![5.0, 1.0, 0.0, 0.0, 0.0]],
        a: vec![vec![0.5]],
        b: vec![vec![0.1]],
        seed: vec![vec![0.0]],
        sigma: vec![vec![0.01]],
        r_squared: Vec::new(),
    };
    let tr = gen_demand_traces(&truth, &DEFAULT_CYCLES, 2000, 8).unwrap();
    let (_, fit) = fit_traces(&tr, 1, &DEFAULT_CYCLES).unwrap();
    assert!((fit.a[0][0] - 0.5).abs() <= 0.05, "{}", fit.a[0][0]);
    assert!((fit.phi[0][0] - 5.0).abs() < 0.05);
}
