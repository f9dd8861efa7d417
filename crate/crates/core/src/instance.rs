//! Problem data model: topology, cost schedule, forecast and uncertainty, plus
//! the cost accounting and feasibility checks shared by every solver.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::UncertaintySpec;

/// Absolute tolerance for every feasibility check on plans.
pub const PLAN_TOL: f64 = 1e-6;

pub type Matrix = Vec<Vec<f64>>;

/// Delays (ms) and hop counts from every access point to every edge node and
/// to the cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ap_count: usize,
    pub en_count: usize,
    /// `[i][j]`
    pub delay_edge: Matrix,
    /// `[i]`
    pub delay_cloud: Vec<f64>,
    /// `[i][j]`
    pub hops_edge: Vec<Vec<u32>>,
    /// `[i]`
    pub hops_cloud: Vec<u32>,
}

/// Prices, fixed costs and physical parameters. Time-indexed arrays are
/// `[j][t]` (edge) or `[t]` (cloud); prices are $/vCPU·h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    /// Slot length in hours.
    pub slot_length: f64,
    pub reserve_price_edge: Matrix,
    pub reserve_price_cloud: Vec<f64>,
    pub buy_price_edge: Matrix,
    pub buy_price_cloud: Vec<f64>,
    pub sell_price_edge: Matrix,
    pub sell_price_cloud: Vec<f64>,
    pub install_cost: Matrix,
    pub storage_cost: Matrix,
    /// `[m][j][t]`: download from edge node `m` to edge node `j`.
    pub download_en: Vec<Matrix>,
    /// `[j][t]`: download from the cloud to edge node `j`.
    pub download_cloud: Matrix,
    /// $ per hop and data unit.
    pub bandwidth_unit: f64,
    /// Data units per request.
    pub request_size: f64,
    /// vCPU per request.
    pub resource_per_request: f64,
    /// $ per ms and request.
    pub delay_penalty: f64,
    /// vCPU per edge node.
    pub capacity: Vec<f64>,
    pub initial_placement: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub topology: Topology,
    pub costs: CostSchedule,
    pub horizon: usize,
    /// `[i][t]` forecast requests.
    pub forecast: Matrix,
    pub uncertainty: UncertaintySpec,
}

/// Here-and-now reservation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    /// `[j][t]`
    pub edge: Matrix,
    /// `[t]`
    pub cloud: Vec<f64>,
}

impl FirstStage {
    pub fn zeros(en_count: usize, horizon: usize) -> Self {
        FirstStage { edge: vec![vec![0.0; horizon]; en_count], cloud: vec![0.0; horizon] }
    }
}

/// Wait-and-see decisions for one demand realization. Binary fields hold 0/1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoursePlan {
    /// `[j][t]`
    pub placement: Matrix,
    /// `[j][t]`, 1 iff the service is newly installed at `t`.
    pub startup: Matrix,
    /// `[m][j][t]`
    pub download_en: Vec<Matrix>,
    /// `[j][t]`
    pub download_cloud: Matrix,
    /// `[i][j][t]`
    pub alloc: Vec<Matrix>,
    /// `[i][t]`
    pub alloc_cloud: Matrix,
    pub buy_edge: Matrix,
    pub buy_cloud: Vec<f64>,
    pub sell_edge: Matrix,
    pub sell_cloud: Vec<f64>,
}

impl RecoursePlan {
    pub fn zeros(ap_count: usize, en_count: usize, horizon: usize) -> Self {
        let jt = vec![vec![0.0; horizon]; en_count];
        RecoursePlan {
            placement: jt.clone(),
            startup: jt.clone(),
            download_en: vec![jt.clone(); en_count],
            download_cloud: jt.clone(),
            alloc: vec![jt.clone(); ap_count],
            alloc_cloud: vec![vec![0.0; horizon]; ap_count],
            buy_edge: jt.clone(),
            buy_cloud: vec![0.0; horizon],
            sell_edge: jt,
            sell_cloud: vec![0.0; horizon],
        }
    }

    /// Recomputes `startup` as `max(0, z[t] - z[t-1])`.
    pub fn tighten_startup(&mut self, initial: &[bool]) {
        for (j, row) in self.placement.iter().enumerate() {
            let mut prev = if initial[j] { 1.0 } else { 0.0 };
            for (t, &z) in row.iter().enumerate() {
                self.startup[j][t] = (z - prev).max(0.0);
                prev = z;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub c1_reserve: f64,
    pub c2_adjust: f64,
    pub c3_install: f64,
    pub c4_download: f64,
    pub c5_storage: f64,
    pub c6_delay: f64,
    pub c7_bandwidth: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Procurement, adjustment, placement and storage; excludes the QoS
    /// penalties.
    pub fn payment(&self) -> f64 {
        self.c1_reserve + self.c2_adjust + self.c3_install + self.c4_download + self.c5_storage
    }

    pub fn second_stage(&self) -> f64 {
        self.total - self.c1_reserve
    }

    fn finish(mut self) -> Self {
        self.total = self.c1_reserve
            + self.c2_adjust
            + self.c3_install
            + self.c4_download
            + self.c5_storage
            + self.c6_delay
            + self.c7_bandwidth;
        self
    }
}

impl Instance {
    pub fn ap_count(&self) -> usize {
        self.topology.ap_count
    }

    pub fn en_count(&self) -> usize {
        self.topology.en_count
    }

    /// Per-request delay + bandwidth cost from AP `i` to edge node `j`.
    pub fn route_cost_edge(&self, i: usize, j: usize) -> f64 {
        let c = &self.costs;
        c.delay_penalty * self.topology.delay_edge[i][j]
            + c.bandwidth_unit * c.request_size * self.topology.hops_edge[i][j] as f64
    }

    /// Per-request delay + bandwidth cost from AP `i` to the cloud.
    pub fn route_cost_cloud(&self, i: usize) -> f64 {
        let c = &self.costs;
        c.delay_penalty * self.topology.delay_cloud[i]
            + c.bandwidth_unit * c.request_size * self.topology.hops_cloud[i] as f64
    }

    pub fn initial(&self, j: usize) -> f64 {
        if self.costs.initial_placement[j] {
            1.0
        } else {
            0.0
        }
    }

    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let (i_n, j_n, t_n) = (self.topology.ap_count, self.topology.en_count, self.horizon);
        if t_n < 1 {
            v.push("horizon must be at least 1".to_string());
        }
        if i_n < 1 {
            v.push("ap_count must be at least 1".to_string());
        }
        if j_n < 1 {
            v.push("en_count must be at least 1".to_string());
        }
        let topo = &self.topology;
        check_matrix(&mut v, "topology.delay_edge", &topo.delay_edge, i_n, j_n);
        check_vec(&mut v, "topology.delay_cloud", &topo.delay_cloud, i_n);
        check_shape(&mut v, "topology.hops_edge", topo.hops_edge.iter().map(Vec::len), i_n, j_n);
        if topo.hops_cloud.len() != i_n {
            v.push(format!("topology.hops_cloud has length {} (expected {i_n})", topo.hops_cloud.len()));
        }
        for (name, vals) in [("topology.delay_edge", flat(&topo.delay_edge)), ("topology.delay_cloud", topo.delay_cloud.clone())] {
            if vals.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
                v.push(format!("{name}: all delays must be positive and finite"));
            }
        }
        if topo.hops_edge.iter().flatten().chain(&topo.hops_cloud).any(|&h| h < 1) {
            v.push("topology: every hop count must be at least 1".to_string());
        }

        let c = &self.costs;
        let jt = [
            ("costs.reserve_price_edge", &c.reserve_price_edge),
            ("costs.buy_price_edge", &c.buy_price_edge),
            ("costs.sell_price_edge", &c.sell_price_edge),
            ("costs.install_cost", &c.install_cost),
            ("costs.storage_cost", &c.storage_cost),
            ("costs.download_cloud", &c.download_cloud),
        ];
        for (name, m) in jt {
            check_matrix(&mut v, name, m, j_n, t_n);
            if m.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
                v.push(format!("{name}: entries must be nonnegative and finite"));
            }
        }
        for (name, m) in [
            ("costs.reserve_price_cloud", &c.reserve_price_cloud),
            ("costs.buy_price_cloud", &c.buy_price_cloud),
            ("costs.sell_price_cloud", &c.sell_price_cloud),
        ] {
            check_vec(&mut v, name, m, t_n);
            if m.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                v.push(format!("{name}: entries must be nonnegative and finite"));
            }
        }
        if c.download_en.len() != j_n {
            v.push(format!("costs.download_en has {} sources (expected {j_n})", c.download_en.len()));
        }
        for (m, mat) in c.download_en.iter().enumerate() {
            check_matrix(&mut v, &format!("costs.download_en[{m}]"), mat, j_n, t_n);
            if mat.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
                v.push(format!("costs.download_en[{m}]: entries must be nonnegative and finite"));
            }
        }
        check_vec(&mut v, "costs.capacity", &c.capacity, j_n);
        if c.capacity.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            v.push("costs.capacity: every capacity must be positive".to_string());
        }
        if c.initial_placement.len() != j_n {
            v.push(format!("costs.initial_placement has length {} (expected {j_n})", c.initial_placement.len()));
        }
        for (name, x) in [
            ("slot_length", c.slot_length),
            ("bandwidth_unit", c.bandwidth_unit),
            ("request_size", c.request_size),
            ("resource_per_request", c.resource_per_request),
            ("delay_penalty", c.delay_penalty),
        ] {
            if x < 0.0 || !x.is_finite() {
                v.push(format!("costs.{name} must be nonnegative and finite"));
            }
        }

        // price ordering a <= p <= e at every node-period
        let shapes_ok = [&c.reserve_price_edge, &c.buy_price_edge, &c.sell_price_edge]
            .iter()
            .all(|m| m.len() == j_n && m.iter().all(|r| r.len() == t_n));
        if shapes_ok {
            for j in 0..j_n {
                for t in 0..t_n {
                    let (a, p, e) = (c.sell_price_edge[j][t], c.reserve_price_edge[j][t], c.buy_price_edge[j][t]);
                    if !(a <= p && p <= e) {
                        v.push(format!(
                            "price ordering sell <= reserve <= buy violated at edge node {j}, period {t} ({a} / {p} / {e})"
                        ));
                    }
                }
            }
        }
        if [&c.reserve_price_cloud, &c.buy_price_cloud, &c.sell_price_cloud].iter().all(|m| m.len() == t_n) {
            for t in 0..t_n {
                let (a, p, e) = (c.sell_price_cloud[t], c.reserve_price_cloud[t], c.buy_price_cloud[t]);
                if !(a <= p && p <= e) {
                    v.push(format!("price ordering sell <= reserve <= buy violated at the cloud, period {t} ({a} / {p} / {e})"));
                }
            }
        }

        check_matrix(&mut v, "forecast", &self.forecast, i_n, t_n);
        if self.forecast.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
            v.push("forecast: demand must be nonnegative and finite".to_string());
        }
        v.extend(self.uncertainty.violations(i_n, t_n));
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn with_uncertainty(&self, uncertainty: UncertaintySpec) -> Instance {
        Instance { uncertainty, ..self.clone() }
    }

    fn check_first_stage(&self, fs: &FirstStage) -> Result<()> {
        let (j_n, t_n) = (self.en_count(), self.horizon);
        if fs.edge.len() != j_n || fs.edge.iter().any(|r| r.len() != t_n) || fs.cloud.len() != t_n {
            return Err(Error::Dimension(format!("first stage must be {j_n}x{t_n} (edge) and {t_n} (cloud)")));
        }
        Ok(())
    }

    fn check_plan(&self, rp: &RecoursePlan) -> Result<()> {
        let (i_n, j_n, t_n) = (self.ap_count(), self.en_count(), self.horizon);
        let jt = |m: &Matrix| m.len() == j_n && m.iter().all(|r| r.len() == t_n);
        let ok = jt(&rp.placement)
            && jt(&rp.startup)
            && rp.download_en.len() == j_n
            && rp.download_en.iter().all(jt)
            && jt(&rp.download_cloud)
            && rp.alloc.len() == i_n
            && rp.alloc.iter().all(jt)
            && rp.alloc_cloud.len() == i_n
            && rp.alloc_cloud.iter().all(|r| r.len() == t_n)
            && jt(&rp.buy_edge)
            && jt(&rp.sell_edge)
            && rp.buy_cloud.len() == t_n
            && rp.sell_cloud.len() == t_n;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!("recourse plan does not match I={i_n}, J={j_n}, T={t_n}")))
        }
    }

    /// Seven-term cost of a reservation plus recourse plan. The installation
    /// term is charged through the startup indicator.
    pub fn cost_breakdown(&self, fs: &FirstStage, rp: &RecoursePlan) -> Result<CostBreakdown> {
        self.check_first_stage(fs)?;
        self.check_plan(rp)?;
        let c = &self.costs;
        let (i_n, j_n, t_n) = (self.ap_count(), self.en_count(), self.horizon);
        let d = c.slot_length;
        let mut b = CostBreakdown::default();
        for t in 0..t_n {
            b.c1_reserve += d * c.reserve_price_cloud[t] * fs.cloud[t];
            b.c2_adjust += d * (c.buy_price_cloud[t] * rp.buy_cloud[t] - c.sell_price_cloud[t] * rp.sell_cloud[t]);
            for j in 0..j_n {
                b.c1_reserve += d * c.reserve_price_edge[j][t] * fs.edge[j][t];
                b.c2_adjust += d * (c.buy_price_edge[j][t] * rp.buy_edge[j][t] - c.sell_price_edge[j][t] * rp.sell_edge[j][t]);
                b.c3_install += c.install_cost[j][t] * rp.startup[j][t];
                b.c4_download += c.download_cloud[j][t] * rp.download_cloud[j][t];
                for m in (0..j_n).filter(|&m| m != j) {
                    b.c4_download += c.download_en[m][j][t] * rp.download_en[m][j][t];
                }
                b.c5_storage += c.storage_cost[j][t] * rp.placement[j][t];
            }
            for i in 0..i_n {
                let topo = &self.topology;
                b.c6_delay += c.delay_penalty * topo.delay_cloud[i] * rp.alloc_cloud[i][t];
                b.c7_bandwidth += c.bandwidth_unit * c.request_size * topo.hops_cloud[i] as f64 * rp.alloc_cloud[i][t];
                for j in 0..j_n {
                    b.c6_delay += c.delay_penalty * topo.delay_edge[i][j] * rp.alloc[i][j][t];
                    b.c7_bandwidth += c.bandwidth_unit * c.request_size * topo.hops_edge[i][j] as f64 * rp.alloc[i][j][t];
                }
            }
        }
        Ok(b.finish())
    }

    /// Checks a recourse plan against demand `lambda` (`[i][t]`) and the
    /// reservation. Returns every violation beyond [`PLAN_TOL`].
    pub fn validate_recourse(&self, fs: &FirstStage, rp: &RecoursePlan, lambda: &Matrix) -> Vec<Violation> {
        let mut out = Vec::new();
        let (i_n, j_n, t_n) = (self.ap_count(), self.en_count(), self.horizon);
        if let Err(e) = self.check_first_stage(fs).and_then(|_| self.check_plan(rp)) {
            out.push(Violation { rule: Rule::Dimensions, at: e.to_string(), amount: f64::NAN });
            return out;
        }
        if lambda.len() != i_n || lambda.iter().any(|r| r.len() != t_n) {
            out.push(Violation { rule: Rule::Dimensions, at: format!("demand must be {i_n}x{t_n}"), amount: f64::NAN });
            return out;
        }
        let c = &self.costs;
        let w = c.resource_per_request;
        let mut check = |rule: Rule, at: String, excess: f64| {
            if excess > PLAN_TOL {
                out.push(Violation { rule, at, amount: excess });
            }
        };
        for t in 0..t_n {
            for i in 0..i_n {
                let served = rp.alloc_cloud[i][t] + (0..j_n).map(|j| rp.alloc[i][j][t]).sum::<f64>();
                check(Rule::DemandCoverage, format!("i={i} t={t}"), lambda[i][t] - served);
            }
            for j in 0..j_n {
                let net = fs.edge[j][t] + rp.buy_edge[j][t] - rp.sell_edge[j][t];
                let load = w * (0..i_n).map(|i| rp.alloc[i][j][t]).sum::<f64>();
                check(Rule::EdgeCapacity, format!("j={j} t={t}"), net - c.capacity[j] * rp.placement[j][t]);
                check(Rule::SellBackEdge, format!("j={j} t={t}"), rp.sell_edge[j][t] - fs.edge[j][t]);
                check(Rule::EdgeBalance, format!("j={j} t={t}"), load - net);
                check(Rule::ReserveBounds, format!("j={j} t={t}"), fs.edge[j][t] - c.capacity[j]);
                check(Rule::ReserveBounds, format!("j={j} t={t}"), -fs.edge[j][t]);
            }
            let net0 = fs.cloud[t] + rp.buy_cloud[t] - rp.sell_cloud[t];
            let load0 = w * (0..i_n).map(|i| rp.alloc_cloud[i][t]).sum::<f64>();
            check(Rule::SellBackCloud, format!("t={t}"), rp.sell_cloud[t] - fs.cloud[t]);
            check(Rule::CloudBalance, format!("t={t}"), load0 - net0);
            check(Rule::ReserveBounds, format!("cloud t={t}"), -fs.cloud[t]);

            for m in 0..j_n {
                let prev = if t == 0 { self.initial(m) } else { rp.placement[m][t - 1] };
                let out_m: f64 = (0..j_n).filter(|&j| j != m).map(|j| rp.download_en[m][j][t]).sum();
                check(Rule::DownloadSource, format!("m={m} t={t}"), out_m - prev);
            }
            for j in 0..j_n {
                let prev = if t == 0 { self.initial(j) } else { rp.placement[j][t - 1] };
                let inflow: f64 =
                    (0..j_n).filter(|&m| m != j).map(|m| rp.download_en[m][j][t]).sum::<f64>() + rp.download_cloud[j][t];
                let rise = rp.placement[j][t] - prev;
                check(Rule::DownloadRequired, format!("j={j} t={t}"), rise - inflow);
                check(Rule::Startup, format!("j={j} t={t}"), rise - rp.startup[j][t]);
            }
        }

        // sign and binarity
        let binaries = rp
            .placement
            .iter()
            .flatten()
            .chain(rp.download_cloud.iter().flatten())
            .chain(rp.download_en.iter().flatten().flatten());
        for &b in binaries {
            let off = b.min((b - 1.0).abs()).max(0.0).max(-b).max(b - 1.0);
            if off > PLAN_TOL {
                out.push(Violation { rule: Rule::Domain, at: format!("binary value {b}"), amount: off });
            }
        }
        let continuous = rp
            .alloc
            .iter()
            .flatten()
            .flatten()
            .chain(rp.alloc_cloud.iter().flatten())
            .chain(rp.buy_edge.iter().flatten())
            .chain(rp.sell_edge.iter().flatten())
            .chain(&rp.buy_cloud)
            .chain(&rp.sell_cloud)
            .chain(rp.startup.iter().flatten());
        for &x in continuous {
            if -x > PLAN_TOL {
                out.push(Violation { rule: Rule::Domain, at: format!("negative value {x}"), amount: -x });
            }
        }
        out
    }
}

/// Which feasibility rule a plan breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Dimensions,
    /// Reservation within `[0, C_j]`, cloud reservation nonnegative.
    ReserveBounds,
    /// Every area's demand is served by edge nodes or the cloud.
    DemandCoverage,
    /// `s + yB - yS <= C_j z`.
    EdgeCapacity,
    /// Edge sell-back cannot exceed the reservation.
    SellBackEdge,
    /// Cloud sell-back cannot exceed the reservation.
    SellBackCloud,
    /// Cloud resources cover the cloud workload.
    CloudBalance,
    /// Edge resources cover the edge workload.
    EdgeBalance,
    /// A node can only serve downloads if it held the service in the previous period.
    DownloadSource,
    /// A new placement must be downloaded from the cloud or another node.
    DownloadRequired,
    /// Startup indicator covers every new placement.
    Startup,
    /// Nonnegativity and binarity.
    Domain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub at: String,
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {} (by {:.3e})", self.rule, self.at, self.amount)
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    Instance::from_json(&text)
}

fn flat(m: &Matrix) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

fn check_shape(v: &mut Vec<String>, name: &str, mut lens: impl ExactSizeIterator<Item = usize>, rows: usize, cols: usize) {
    if lens.len() != rows {
        v.push(format!("{name} has {} rows (expected {rows})", lens.len()));
    } else if let Some(bad) = lens.find(|&l| l != cols) {
        v.push(format!("{name} has a row of length {bad} (expected {cols})"));
    }
}

fn check_matrix(v: &mut Vec<String>, name: &str, m: &Matrix, rows: usize, cols: usize) {
    check_shape(v, name, m.iter().map(Vec::len), rows, cols);
}

fn check_vec(v: &mut Vec<String>, name: &str, x: &[f64], len: usize) {
    if x.len() != len {
        v.push(format!("{name} has length {} (expected {len})", x.len()));
    }
}

/// Historical demand, one series per area.
#[derive(Clone, Debug, PartialEq)]
pub struct Traces {
    pub periods: Vec<i64>,
    /// `[i][k]`
    pub series: Vec<Vec<f64>>,
}

impl Traces {
    pub fn area_count(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Reads `period,area_1,...,area_I`.
    pub fn read_csv(reader: impl std::io::Read) -> Result<Traces> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("period") {
            return Err(Error::Dimension("trace CSV must start with a `period` column".into()));
        }
        for (k, h) in headers.iter().enumerate().skip(1) {
            if h != format!("area_{k}") {
                return Err(Error::Dimension(format!("trace CSV column {k} is `{h}`, expected `area_{k}`")));
            }
        }
        let areas = headers.len() - 1;
        let mut periods = Vec::new();
        let mut series = vec![Vec::new(); areas];
        for rec in rdr.records() {
            let rec = rec?;
            let p: i64 = rec[0].trim().parse().map_err(|_| Error::Dimension(format!("bad period `{}`", &rec[0])))?;
            periods.push(p);
            for (i, s) in series.iter_mut().enumerate() {
                let x: f64 = rec[i + 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Dimension(format!("bad value `{}` in period {p}", &rec[i + 1])))?;
                s.push(x);
            }
        }
        Ok(Traces { periods, series })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Traces> {
        Traces::read_csv(fs::File::open(path)?)
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["period".to_string()];
        header.extend((1..=self.area_count()).map(|k| format!("area_{k}")));
        w.write_record(&header)?;
        for (k, p) in self.periods.iter().enumerate() {
            let mut row = vec![p.to_string()];
            row.extend(self.series.iter().map(|s| format!("{}", s[k])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(fs::File::create(path)?)
    }
}
