//! Out-of-sample evaluation of first-stage decisions on sampled demand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CostBreakdown, FirstStage, Instance, Matrix};
use crate::models::SaroPlan;
use crate::rod::{recourse_at, saro_route, RodResult};
use crate::solver::SolveParams;
use crate::uncertainty::{dus_residuals, UncertaintySpec};

/// Demand trajectories drawn around the forecast: uniform drivers in
/// `[-1, 1]` for a static set, standard normal innovations for a dynamic one.
/// Negative demand is clipped to zero.
pub fn sample_trajectories(spec: &UncertaintySpec, forecast: &Matrix, count: usize, seed: u64) -> Result<Vec<Matrix>> {
    let i_n = forecast.len();
    let t_n = forecast.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let deviation = match spec {
            UncertaintySpec::Sus(s) => (0..i_n)
                .map(|i| (0..t_n).map(|t| s.deviation[i][t] * rng.random_range(-1.0..=1.0)).collect())
                .collect(),
            UncertaintySpec::Dus(d) => {
                let drive: Matrix = (0..i_n).map(|_| (0..t_n).map(|_| rng.sample(StandardNormal)).collect()).collect();
                dus_residuals(d, &drive, t_n, true)?
            }
        };
        out.push(
            (0..i_n)
                .map(|i| (0..t_n).map(|t| (forecast[i][t] + deviation[i][t]).max(0.0)).collect())
                .collect(),
        );
    }
    Ok(out)
}

/// What is held fixed during evaluation.
#[derive(Clone, Debug)]
pub enum Policy<'a> {
    /// Reservation only; placement and trading adapt to each trajectory.
    Adaptive(&'a FirstStage),
    /// Placement and reservation fixed, allocation constant over time.
    Static(&'a SaroPlan),
}

impl<'a> Policy<'a> {
    pub fn of(result: &'a RodResult) -> Policy<'a> {
        match &result.static_plan {
            Some(plan) => Policy::Static(plan),
            None => Policy::Adaptive(&result.first_stage),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub breakdown: CostBreakdown,
    /// Cost of demand the policy could not serve, routed to the cloud at
    /// the on-spot price. Included in `total`.
    pub penalty: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub expected_total: f64,
    pub expected_payment: f64,
    pub expected_adjustment: f64,
    pub expected_penalty: f64,
    pub worst_total: f64,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub trajectories: usize,
    pub policies: Vec<PolicyReport>,
}

impl EvalReport {
    /// One row per policy and trajectory.
    pub fn write_samples_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["policy", "trajectory", "total", "payment", "adjustment", "penalty"])?;
        for p in &self.policies {
            for (k, s) in p.samples.iter().enumerate() {
                w.write_record([
                    p.policy.clone(),
                    k.to_string(),
                    s.total.to_string(),
                    s.breakdown.payment().to_string(),
                    s.breakdown.c2_adjust.to_string(),
                    s.penalty.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_dims(inst: &Instance, lambda: &Matrix) -> Result<()> {
    if lambda.len() != inst.ap_count() || lambda.iter().any(|r| r.len() != inst.horizon) {
        return Err(Error::Dimension(format!("trajectory must be {}x{}", inst.ap_count(), inst.horizon)));
    }
    Ok(())
}

/// Realized cost of `policy` on every trajectory.
pub fn monte_carlo_eval(
    inst: &Instance,
    name: &str,
    policy: &Policy<'_>,
    trajectories: &[Matrix],
    params: &SolveParams,
) -> Result<PolicyReport> {
    let c = &inst.costs;
    let spot: Matrix = (0..inst.ap_count())
        .map(|i| {
            (0..inst.horizon)
                .map(|t| inst.route_cost_cloud(i) + c.resource_per_request * c.slot_length * c.buy_price_cloud[t])
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(trajectories.len());
    for (k, lambda) in trajectories.iter().enumerate() {
        check_dims(inst, lambda)?;
        let sample = match policy {
            Policy::Adaptive(fs) => {
                let (_, plan) = recourse_at(inst, fs, lambda, params).map_err(|e| e.context(format!("trajectory {k}")))?;
                let breakdown = inst.cost_breakdown(fs, &plan)?;
                Sample { breakdown, penalty: 0.0, total: breakdown.total }
            }
            Policy::Static(plan) => {
                let (_, shortfall, x, x0) =
                    saro_route(inst, plan, lambda, &spot, params).map_err(|e| e.context(format!("trajectory {k}")))?;
                let fs = plan.first_stage(inst.horizon);
                let breakdown = inst.cost_breakdown(&fs, &plan.recourse_plan(inst, &x, &x0))?;
                let penalty: f64 = shortfall.iter().flatten().zip(spot.iter().flatten()).map(|(s, p)| s * p).sum();
                Sample { breakdown, penalty, total: breakdown.total + penalty }
            }
        };
        samples.push(sample);
    }
    let n = samples.len().max(1) as f64;
    let mean = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    Ok(PolicyReport {
        policy: name.to_string(),
        expected_total: mean(&|s| s.total),
        expected_payment: mean(&|s| s.breakdown.payment()),
        expected_adjustment: mean(&|s| s.breakdown.c2_adjust),
        expected_penalty: mean(&|s| s.penalty),
        worst_total: samples.iter().map(|s| s.total).fold(f64::NEG_INFINITY, f64::max),
        samples,
    })
}
