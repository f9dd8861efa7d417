//! Synthetic instances: scale-free topology, sampled prices, demand traces
//! with known seasonal and autoregressive structure.

use std::ops::Add;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{seasonal_value, ArFit, DEFAULT_CYCLES};
use crate::instance::{CostSchedule, Instance, Matrix, Topology, Traces};
use crate::uncertainty::{DusSpec, SusSpec, UncertaintySpec};

/// Path length ordered by delay, then hop count.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PathCost {
    pub delay: f64,
    pub hops: u32,
}

impl Add for PathCost {
    type Output = PathCost;

    fn add(self, o: PathCost) -> PathCost {
        PathCost { delay: self.delay + o.delay, hops: self.hops + o.hops }
    }
}

/// Undirected graph with link delays in ms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub node_count: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Network {
    /// Barabási-Albert graph: a clique on `attach + 1` nodes, then each new
    /// node links to `attach` distinct nodes drawn proportionally to degree.
    pub fn barabasi_albert(n: usize, attach: usize, delay_range: (f64, f64), rng: &mut impl Rng) -> Result<Network> {
        if attach < 1 || n < attach + 1 {
            return Err(Error::Validation(vec![format!("BA graph needs attach >= 1 and n >= attach + 1, got n={n}, attach={attach}")]));
        }
        let (lo, hi) = delay_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Validation(vec![format!("invalid delay range [{lo}, {hi}]")]));
        }
        let delay = |rng: &mut dyn rand::RngCore| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let mut edges = Vec::new();
        let mut ends: Vec<usize> = Vec::new();
        for a in 0..=attach {
            for b in 0..a {
                edges.push((b, a, delay(rng)));
                ends.extend([a, b]);
            }
        }
        for v in attach + 1..n {
            let mut targets: Vec<usize> = Vec::with_capacity(attach);
            while targets.len() < attach {
                let u = ends[rng.random_range(0..ends.len())];
                if !targets.contains(&u) {
                    targets.push(u);
                }
            }
            for u in targets {
                edges.push((u, v, delay(rng)));
                ends.extend([u, v]);
            }
        }
        Ok(Network { node_count: n, edges })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.node_count];
        for &(a, b, _) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    fn graph(&self) -> UnGraph<(), f64> {
        let mut g = UnGraph::with_capacity(self.node_count, self.edges.len());
        for _ in 0..self.node_count {
            g.add_node(());
        }
        for &(a, b, w) in &self.edges {
            g.add_edge(NodeIndex::new(a), NodeIndex::new(b), w);
        }
        g
    }

    /// Shortest delay from `source` to every node, with the hop count of that
    /// path. `None` for unreachable nodes.
    pub fn shortest_from(&self, source: usize) -> Vec<Option<PathCost>> {
        let g = self.graph();
        let dist = dijkstra(&g, NodeIndex::new(source), None, |e| PathCost { delay: *e.weight(), hops: 1 });
        (0..self.node_count).map(|v| dist.get(&NodeIndex::new(v)).copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    pub node_count: usize,
    pub attach: usize,
    pub delay_range: (f64, f64),
    /// Delay of the link joining the cloud to the hub.
    pub cloud_delay: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig { node_count: 100, attach: 2, delay_range: (2.0, 10.0), cloud_delay: 50.0 }
    }
}

/// Node roles picked from a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Designation {
    pub hub: usize,
    pub aps: Vec<usize>,
    pub ens: Vec<usize>,
}

/// Hub is the highest-degree node; access points are the next `ap_count`
/// nodes by degree and edge nodes the `en_count` after them. Ties go to the
/// lower index.
pub fn designate(net: &Network, ap_count: usize, en_count: usize) -> Result<Designation> {
    if net.node_count < ap_count + en_count + 1 {
        return Err(Error::Validation(vec![format!(
            "{} nodes cannot host {ap_count} access points, {en_count} edge nodes and a hub",
            net.node_count
        )]));
    }
    let deg = net.degrees();
    let mut order: Vec<usize> = (0..net.node_count).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    Ok(Designation {
        hub: order[0],
        aps: order[1..=ap_count].to_vec(),
        ens: order[ap_count + 1..=ap_count + en_count].to_vec(),
    })
}

/// Delays and hops between designated nodes. The cloud is an extra node
/// linked to the hub.
pub fn topology_of(net: &Network, roles: &Designation, cloud_delay: f64) -> Result<Topology> {
    let mut full = net.clone();
    let cloud = full.node_count;
    full.node_count += 1;
    full.edges.push((roles.hub, cloud, cloud_delay));
    let (i_n, j_n) = (roles.aps.len(), roles.ens.len());
    let mut delay_edge = vec![vec![0.0; j_n]; i_n];
    let mut hops_edge = vec![vec![0; j_n]; i_n];
    let mut delay_cloud = vec![0.0; i_n];
    let mut hops_cloud = vec![0; i_n];
    for (i, &ap) in roles.aps.iter().enumerate() {
        let paths = full.shortest_from(ap);
        let reach = |v: usize| paths[v].ok_or_else(|| Error::Validation(vec![format!("node {v} unreachable from {ap}")]));
        for (j, &en) in roles.ens.iter().enumerate() {
            let p = reach(en)?;
            delay_edge[i][j] = p.delay;
            hops_edge[i][j] = p.hops;
        }
        let p = reach(cloud)?;
        delay_cloud[i] = p.delay;
        hops_cloud[i] = p.hops;
    }
    Ok(Topology { ap_count: i_n, en_count: j_n, delay_edge, delay_cloud, hops_edge, hops_cloud })
}

pub fn gen_topology(cfg: &TopologyConfig, ap_count: usize, en_count: usize, seed: u64) -> Result<Topology> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::barabasi_albert(cfg.node_count, cfg.attach, cfg.delay_range, &mut rng)?;
    let roles = designate(&net, ap_count, en_count)?;
    topology_of(&net, &roles, cfg.cloud_delay)
}

pub const CAPACITY_CHOICES: [f64; 3] = [32.0, 48.0, 64.0];

/// Prices and fixed costs drawn from the simulation ranges.
pub fn gen_costs(_ap_count: usize, en_count: usize, horizon: usize, seed: u64) -> CostSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..=hi);
    let (j_n, t_n) = (en_count, horizon);
    let mut reserve = vec![vec![0.0; t_n]; j_n];
    let mut buy = vec![vec![0.0; t_n]; j_n];
    let mut sell = vec![vec![0.0; t_n]; j_n];
    for j in 0..j_n {
        for t in 0..t_n {
            loop {
                let (p, e, a) = (u(0.08, 0.15), u(0.10, 0.15), u(0.01, 0.03));
                if a <= p && p <= e {
                    (reserve[j][t], buy[j][t], sell[j][t]) = (p, e, a);
                    break;
                }
            }
        }
    }
    let reserve_cloud = vec![0.06; t_n];
    let buy_cloud: Vec<f64> = (0..t_n).map(|t| reserve_cloud[t] + u(0.03, 0.05)).collect();
    let sell_cloud: Vec<f64> = (0..t_n).map(|_| u(0.01, 0.02)).collect();
    let install: Matrix = (0..j_n).map(|_| (0..t_n).map(|_| u(0.10, 0.15)).collect()).collect();
    let storage: Matrix = (0..j_n).map(|_| (0..t_n).map(|_| u(0.20, 0.30)).collect()).collect();
    let download_en: Vec<Matrix> = (0..j_n)
        .map(|m| (0..j_n).map(|j| (0..t_n).map(|_| if m == j { 0.0 } else { u(0.05, 0.08) }).collect()).collect())
        .collect();
    let download_cloud: Matrix = (0..j_n).map(|_| (0..t_n).map(|_| u(0.10, 0.30)).collect()).collect();
    let capacity = (0..j_n).map(|_| CAPACITY_CHOICES[rng.random_range(0..CAPACITY_CHOICES.len())]).collect();
    CostSchedule {
        slot_length: 1.0 / 3.0,
        reserve_price_edge: reserve,
        reserve_price_cloud: reserve_cloud,
        buy_price_edge: buy,
        buy_price_cloud: buy_cloud,
        sell_price_edge: sell,
        sell_price_cloud: sell_cloud,
        install_cost: install,
        storage_cost: storage,
        download_en,
        download_cloud,
        bandwidth_unit: 0.02,
        request_size: 0.02,
        resource_per_request: 0.02,
        delay_penalty: 0.0001,
        capacity,
        initial_placement: vec![false; j_n],
    }
}

/// Residuals of the AR process seeded by `truth.seed`, driven by Gaussian
/// innovations through `truth.b`.
pub fn gen_residuals(truth: &ArFit, periods: usize, rng: &mut impl Rng) -> Matrix {
    let i_n = truth.a.len();
    let lag = truth.lag();
    let mut out = vec![Vec::with_capacity(periods); i_n];
    for t in 0..periods {
        let eps: Vec<f64> = (0..i_n).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..i_n {
            let mut r: f64 = (0..i_n).map(|k| truth.b[i][k] * eps[k]).sum();
            for s in 1..=lag {
                let prev = if t >= s { out[i][t - s] } else { truth.seed.get(i).and_then(|x| x.get(lag + t - s)).copied().unwrap_or(0.0) };
                r += truth.a[i][s - 1] * prev;
            }
            out[i].push(r);
        }
    }
    out
}

/// `λ = seasonal(φ) + AR residual`, clipped at zero, periods `0..periods`.
pub fn gen_demand_traces(truth: &ArFit, cycles: &[f64], periods: usize, seed: u64) -> Result<Traces> {
    let i_n = truth.a.len();
    if truth.phi.len() != i_n || truth.b.len() != i_n || truth.b.iter().any(|r| r.len() != i_n) {
        return Err(Error::Dimension(format!("trace parameters must cover {i_n} areas")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resid = gen_residuals(truth, periods, &mut rng);
    let series = (0..i_n)
        .map(|i| (0..periods).map(|t| (seasonal_value(&truth.phi[i], t as f64, cycles) + resid[i][t]).max(0.0)).collect())
        .collect();
    Ok(Traces { periods: (0..periods as i64).collect(), series })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Sus,
    Dus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub ap_count: usize,
    pub en_count: usize,
    pub horizon: usize,
    pub lag: usize,
    pub budget: usize,
    pub kind: SetKind,
    /// Static deviation as a fraction of the forecast.
    pub alpha: f64,
    /// Mean requests per area and period.
    pub demand_level: f64,
    /// Innovation standard deviation as a fraction of the area mean.
    pub noise: f64,
    /// Periods of synthetic history before the planning horizon.
    pub history: usize,
    pub topology: TopologyConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            ap_count: 20,
            en_count: 10,
            horizon: 6,
            lag: 1,
            budget: 5,
            kind: SetKind::Dus,
            alpha: 0.3,
            demand_level: 800.0,
            noise: 0.15,
            history: 2000,
            topology: TopologyConfig::default(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Small instance for exhaustive cross-checks.
    pub fn tiny(ap_count: usize, en_count: usize, horizon: usize, budget: usize, kind: SetKind, seed: u64) -> Self {
        ScenarioConfig {
            ap_count,
            en_count,
            horizon,
            lag: 1,
            budget,
            kind,
            history: 200,
            topology: TopologyConfig { node_count: ap_count + en_count + 4, ..TopologyConfig::default() },
            seed,
            ..ScenarioConfig::default()
        }
    }
}

/// Ground truth behind a generated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub instance: Instance,
    pub truth: ArFit,
    pub traces: Traces,
}

/// Random stable AR parameters and correlated innovations.
pub fn gen_truth(cfg: &ScenarioConfig, rng: &mut impl Rng) -> ArFit {
    let i_n = cfg.ap_count;
    let mut phi = Vec::with_capacity(i_n);
    for _ in 0..i_n {
        let base = cfg.demand_level * rng.random_range(0.6..=1.4);
        let mut row = vec![base];
        for k in 0..2 * DEFAULT_CYCLES.len() {
            let amp = if k < 2 { 0.3 } else { 0.1 };
            row.push(base * rng.random_range(-amp..=amp));
        }
        phi.push(row);
    }
    let a: Matrix = (0..i_n)
        .map(|_| {
            let a1: f64 = rng.random_range(0.2..=0.6);
            (0..cfg.lag).map(|s| a1 * 0.3f64.powi(s as i32)).collect()
        })
        .collect();
    let sd: Vec<f64> = phi.iter().map(|p| cfg.noise * p[0]).collect();
    let corr = 0.3;
    let sigma: Matrix = (0..i_n)
        .map(|i| (0..i_n).map(|k| if i == k { sd[i] * sd[i] } else { corr * sd[i] * sd[k] }).collect())
        .collect();
    let b = cholesky_lower(&sigma);
    ArFit { phi, a, b, seed: vec![vec![0.0; cfg.lag]; i_n], sigma, r_squared: Vec::new() }
}

fn cholesky_lower(m: &Matrix) -> Matrix {
    let n = m.len();
    let dm = nalgebra::DMatrix::from_fn(n, n, |r, c| m[r][c]);
    let l = nalgebra::Cholesky::new(dm).expect("equicorrelated covariance with corr < 1 is positive definite").l();
    (0..n).map(|r| (0..n).map(|c| l[(r, c)]).collect()).collect()
}

/// Full synthetic instance. The forecast continues the seasonal component
/// past the history and the dynamic set is seeded with the last residuals.
pub fn generate(cfg: &ScenarioConfig) -> Result<Generated> {
    if cfg.ap_count == 0 || cfg.en_count == 0 || cfg.horizon == 0 {
        return Err(Error::Validation(vec!["areas, edge nodes and horizon must be positive".into()]));
    }
    if cfg.budget > cfg.ap_count {
        return Err(Error::Budget(format!("budget {} exceeds the number of areas {}", cfg.budget, cfg.ap_count)));
    }
    if cfg.history < cfg.lag {
        return Err(Error::Validation(vec!["history must cover at least one lag window".into()]));
    }
    let topology = gen_topology(&cfg.topology, cfg.ap_count, cfg.en_count, cfg.seed)?;
    let costs = gen_costs(cfg.ap_count, cfg.en_count, cfg.horizon, cfg.seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let truth = gen_truth(cfg, &mut rng);
    let traces = gen_demand_traces(&truth, &DEFAULT_CYCLES, cfg.history, cfg.seed.wrapping_add(3))?;
    let start = cfg.history as f64;
    let forecast: Matrix = truth
        .phi
        .iter()
        .map(|phi| (0..cfg.horizon).map(|k| seasonal_value(phi, start + k as f64, &DEFAULT_CYCLES).max(0.0)).collect())
        .collect();
    let seed: Matrix = (0..cfg.ap_count)
        .map(|i| {
            (cfg.history - cfg.lag..cfg.history)
                .map(|t| traces.series[i][t] - seasonal_value(&truth.phi[i], t as f64, &DEFAULT_CYCLES))
                .collect()
        })
        .collect();
    let uncertainty = match cfg.kind {
        SetKind::Sus => UncertaintySpec::Sus(SusSpec::from_alpha(&forecast, cfg.alpha, cfg.budget)),
        SetKind::Dus => UncertaintySpec::Dus(DusSpec {
            lag: cfg.lag,
            ar: truth.a.clone(),
            mixing: truth.b.clone(),
            seed,
            budget: cfg.budget,
            clip_negative: false,
        }),
    };
    let instance = Instance { topology, costs, horizon: cfg.horizon, forecast, uncertainty };
    instance.validate()?;
    Ok(Generated { instance, truth, traces })
}
