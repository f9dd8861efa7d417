use crate::error::Result;
use crate::instance::Matrix;
use crate::solver::{LinearModel, ObjSense, RowSense, VarId};
use crate::uncertainty::{Candidate, UncertaintySpec};

use super::{VarKey, VarMap};

/// Total-demand maximization over budgeted drivers, with the residual
/// recursion written out as equality rows.
#[derive(Clone, Debug)]
pub struct ExtremeModel {
    pub model: LinearModel,
    pub map: VarMap,
    pub g_plus: Vec<Vec<VarId>>,
    pub g_minus: Vec<Vec<VarId>>,
    pub demand: Vec<Vec<VarId>>,
}

impl ExtremeModel {
    pub fn drivers(&self, values: &[f64]) -> Candidate {
        Candidate {
            g: self
                .g_plus
                .iter()
                .zip(&self.g_minus)
                .map(|(p, m)| p.iter().zip(m).map(|(a, b)| (values[a.0].round() - values[b.0].round()) as i8).collect())
                .collect(),
        }
    }
}

pub fn build_extreme_scenario(spec: &UncertaintySpec, forecast: &Matrix) -> Result<ExtremeModel> {
    let i_n = forecast.len();
    let t_n = forecast.first().map_or(0, Vec::len);
    let inf = f64::INFINITY;
    let mut model = LinearModel::new("extreme_scenario", ObjSense::Maximize);
    let mut map = VarMap::default();
    let mut g_plus = vec![Vec::with_capacity(t_n); i_n];
    let mut g_minus = vec![Vec::with_capacity(t_n); i_n];
    let mut resid = vec![Vec::with_capacity(t_n); i_n];
    let mut demand = vec![Vec::with_capacity(t_n); i_n];
    for i in 0..i_n {
        for t in 0..t_n {
            g_plus[i].push(map.add(&mut model, VarKey::DrivePlus { i, t }, 0.0, 1.0, true)?);
            g_minus[i].push(map.add(&mut model, VarKey::DriveMinus { i, t }, 0.0, 1.0, true)?);
            resid[i].push(map.add(&mut model, VarKey::Residual { i, t }, -inf, inf, false)?);
            demand[i].push(map.add(&mut model, VarKey::Demand { i, t }, -inf, inf, false)?);
            model.add_row(format!("sign[{i},{t}]"), [(g_plus[i][t], 1.0), (g_minus[i][t], 1.0)], RowSense::Le, 1.0)?;
        }
    }
    for t in 0..t_n {
        let terms = (0..i_n).flat_map(|i| [(g_plus[i][t], 1.0), (g_minus[i][t], 1.0)]);
        model.add_row(format!("budget[{t}]"), terms, RowSense::Le, spec.budget() as f64)?;
    }
    for i in 0..i_n {
        for t in 0..t_n {
            let mut terms = vec![(resid[i][t], 1.0)];
            let mut rhs = 0.0;
            match spec {
                UncertaintySpec::Sus(s) => {
                    let dev = s.deviation[i][t];
                    terms.push((g_plus[i][t], -dev));
                    terms.push((g_minus[i][t], dev));
                }
                UncertaintySpec::Dus(d) => {
                    for k in 0..i_n {
                        terms.push((g_plus[k][t], -d.mixing[i][k]));
                        terms.push((g_minus[k][t], d.mixing[i][k]));
                    }
                    for s in 1..=d.lag {
                        let a = d.ar[i][s - 1];
                        if t >= s {
                            terms.push((resid[i][t - s], -a));
                        } else {
                            rhs += a * d.seed[i][d.lag + t - s];
                        }
                    }
                }
            }
            model.add_row(format!("rec[{i},{t}]"), terms, RowSense::Eq, rhs)?;
            model.add_row(
                format!("lam[{i},{t}]"),
                [(demand[i][t], 1.0), (resid[i][t], -1.0)],
                RowSense::Eq,
                forecast[i][t],
            )?;
        }
    }
    model.set_objective(demand.iter().flatten().map(|&v| (v, 1.0)), 0.0)?;
    Ok(ExtremeModel { model, map, g_plus, g_minus, demand })
}
