use highs::{Col, HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

use super::{LinearModel, ObjSense, RowSense, SolveParams, SolveResult, SolveStatus, SolverError};

pub(super) fn solve(model: &LinearModel, params: &SolveParams) -> Result<SolveResult, SolverError> {
    if model.num_vars() == 0 {
        return trivially_empty(model);
    }
    let status = run(model, params, true)?;
    match status {
        Outcome::Solved(r) => Ok(r),
        Outcome::InfeasibleOrUnbounded => {
            // Decide with a zero objective: feasible means the original was unbounded.
            let mut probe = model.clone();
            probe.set_objective(std::iter::empty(), 0.0)?;
            match run(&probe, params, false)? {
                Outcome::Solved(r) if r.status.has_solution() => Ok(empty_result(model, SolveStatus::Unbounded)),
                _ => Ok(empty_result(model, SolveStatus::Infeasible)),
            }
        }
    }
}

enum Outcome {
    Solved(SolveResult),
    InfeasibleOrUnbounded,
}

fn run(model: &LinearModel, params: &SolveParams, presolve: bool) -> Result<Outcome, SolverError> {
    let mut pb = RowProblem::new();
    let obj: Vec<f64> = {
        let mut c = vec![0.0; model.num_vars()];
        for &(v, coef) in &model.objective().terms {
            c[v.0] += coef;
        }
        c
    };
    let cols: Vec<Col> = model
        .vars()
        .iter()
        .zip(&obj)
        .map(|(v, &c)| pb.add_column_with_integrality(c, v.lower..=v.upper, v.integer))
        .collect();
    for r in model.rows() {
        let factors: Vec<(Col, f64)> = r.terms.iter().map(|&(v, c)| (cols[v.0], c)).collect();
        match r.sense {
            RowSense::Le => pb.add_row(..=r.rhs, factors),
            RowSense::Ge => pb.add_row(r.rhs.., factors),
            RowSense::Eq => pb.add_row(r.rhs..=r.rhs, factors),
        }
    }
    let sense = match model.objective().sense {
        ObjSense::Minimize => Sense::Minimise,
        ObjSense::Maximize => Sense::Maximise,
    };
    let mut hm = pb
        .try_optimise(sense)
        .map_err(|s| SolverError::Backend(format!("model rejected by HiGHS: {s:?}")))?;
    hm.make_quiet();
    hm.set_option("mip_rel_gap", params.rel_gap);
    hm.set_option("mip_abs_gap", 1e-10);
    hm.set_option("random_seed", params.seed as i32);
    hm.set_option("threads", 1);
    if let Some(limit) = params.time_limit {
        hm.set_option("time_limit", limit);
    }
    if !presolve {
        hm.set_option("presolve", "off");
    }
    let solved = hm
        .try_solve()
        .map_err(|s| SolverError::Backend(format!("HiGHS run failed: {s:?}")))?;

    let status = match solved.status() {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => return Ok(Outcome::Solved(empty_result(model, SolveStatus::Infeasible))),
        HighsModelStatus::Unbounded => return Ok(Outcome::Solved(empty_result(model, SolveStatus::Unbounded))),
        HighsModelStatus::UnboundedOrInfeasible => return Ok(Outcome::InfeasibleOrUnbounded),
        HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
        HighsModelStatus::ObjectiveBound
        | HighsModelStatus::ObjectiveTarget
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedIterationLimit => SolveStatus::GapLimit,
        other => return Err(SolverError::Backend(format!("HiGHS returned status {other:?}"))),
    };
    if status != SolveStatus::Optimal && solved.primal_solution_status() != HighsSolutionStatus::Feasible {
        return Err(SolverError::Backend(format!("HiGHS stopped ({status:?}) without an incumbent")));
    }
    let sol = solved.get_solution();
    let values = sol.columns().to_vec();
    let objective = model.evaluate_objective(&values);
    let (duals, mip_gap, bound) = if model.is_mip() {
        let raw = solved.double_info_value(c"mip_dual_bound").unwrap_or(f64::NAN) + model.objective().constant;
        let bound = match model.objective().sense {
            ObjSense::Minimize if raw.is_finite() => raw.min(objective),
            ObjSense::Maximize if raw.is_finite() => raw.max(objective),
            ObjSense::Minimize => f64::NEG_INFINITY,
            ObjSense::Maximize => f64::INFINITY,
        };
        (None, solved.mip_gap().max(0.0), bound)
    } else {
        (Some(sol.dual_rows().to_vec()), 0.0, objective)
    };
    Ok(Outcome::Solved(SolveResult { status, objective, values, duals, mip_gap, bound }))
}

fn empty_result(model: &LinearModel, status: SolveStatus) -> SolveResult {
    let objective = match (status, model.objective().sense) {
        (SolveStatus::Infeasible, ObjSense::Minimize) | (SolveStatus::Unbounded, ObjSense::Maximize) => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };
    SolveResult { status, objective, values: Vec::new(), duals: None, mip_gap: f64::INFINITY, bound: objective }
}

fn trivially_empty(model: &LinearModel) -> Result<SolveResult, SolverError> {
    let feasible = model.rows().iter().all(|r| match r.sense {
        RowSense::Le => r.rhs >= -super::FEAS_TOL,
        RowSense::Ge => r.rhs <= super::FEAS_TOL,
        RowSense::Eq => r.rhs.abs() <= super::FEAS_TOL,
    });
    if !feasible {
        return Ok(empty_result(model, SolveStatus::Infeasible));
    }
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        objective: model.objective().constant,
        values: Vec::new(),
        duals: Some(vec![0.0; model.num_rows()]),
        mip_gap: 0.0,
        bound: model.objective().constant,
    })
}
