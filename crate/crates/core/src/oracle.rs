//! Brute-force references by enumerating every budgeted driver vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FirstStage, Instance};
use crate::models::build_outer_mp;
use crate::rod::{recourse_at, solve_checked};
use crate::solver::SolveParams;
use crate::uncertainty::{enumerate_candidates, Candidate, UncertaintySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactQ {
    pub value: f64,
    pub argmax: Candidate,
    pub candidates: usize,
}

/// Worst-case recourse value at `fs`, one mixed-integer solve per candidate.
pub fn exact_q(inst: &Instance, fs: &FirstStage, spec: &UncertaintySpec, cap: u128, params: &SolveParams) -> Result<ExactQ> {
    let all = enumerate_candidates(inst.ap_count(), inst.horizon, spec.budget(), cap)?;
    let mut best: Option<(f64, Candidate)> = None;
    for g in &all {
        let lambda = spec.realize(&inst.forecast, g)?;
        let (v, _) = recourse_at(inst, fs, &lambda, params)?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, g.clone()));
        }
    }
    let (value, argmax) = best.ok_or_else(|| Error::Model("no candidates to enumerate".into()))?;
    Ok(ExactQ { value, argmax, candidates: all.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactFull {
    pub objective: f64,
    pub first_stage: FirstStage,
    pub candidates: usize,
}

/// Deterministic equivalent with one recourse copy per candidate.
pub fn exact_full(inst: &Instance, spec: &UncertaintySpec, cap: u128, params: &SolveParams) -> Result<ExactFull> {
    let all = enumerate_candidates(inst.ap_count(), inst.horizon, spec.budget(), cap)?;
    let demands = all.iter().map(|g| spec.realize(&inst.forecast, g)).collect::<Result<Vec<_>>>()?;
    let mp = build_outer_mp(inst, &demands)?;
    let res = solve_checked(&mp.model, params)?;
    Ok(ExactFull { objective: res.objective, first_stage: mp.reserve.extract(&res.values), candidates: all.len() })
}

/// Reservation drawn uniformly: edge up to capacity, cloud up to the
/// resource needed by the whole forecast.
pub fn random_first_stage(inst: &Instance, rng: &mut impl Rng) -> FirstStage {
    let c = &inst.costs;
    let mut fs = FirstStage::zeros(inst.en_count(), inst.horizon);
    for (j, row) in fs.edge.iter_mut().enumerate() {
        for s in row.iter_mut() {
            *s = rng.random_range(0.0..=c.capacity[j]);
        }
    }
    for (t, s) in fs.cloud.iter_mut().enumerate() {
        let load: f64 = inst.forecast.iter().map(|r| r[t]).sum::<f64>() * c.resource_per_request;
        *s = rng.random_range(0.0..=load.max(0.0));
    }
    fs
}
