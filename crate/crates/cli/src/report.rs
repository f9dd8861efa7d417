//! One-at-a-time parameter sweeps written as CSV.

use std::io::Write;
use std::str::FromStr;

use anyhow::{anyhow, bail};
use log::warn;

use rodplan::instance::{Instance, Matrix};
use rodplan::rod::{Baseline, RodConfig};

use crate::commands::{model_name, solve_one};
use crate::settings::Common;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Gamma,
    /// Service installation cost.
    PsiF,
    /// Download cost, from edge nodes and from the cloud.
    PsiH,
    /// Reservation price, edge and cloud.
    PsiP,
    /// On-spot buy-more price, edge and cloud.
    PsiE,
    /// Delay penalty.
    PsiRho,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::PsiF => "psi_f",
            Axis::PsiH => "psi_h",
            Axis::PsiP => "psi_p",
            Axis::PsiE => "psi_e",
            Axis::PsiRho => "psi_rho",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = anyhow::Error;

    /// `gamma=0,1,2` or `psi_p=0.5,1,1.5`
    fn from_str(s: &str) -> anyhow::Result<Sweep> {
        let (name, list) = s.split_once('=').ok_or_else(|| anyhow!("sweep must look like axis=v1,v2,..."))?;
        let axis = match name.trim() {
            "gamma" => Axis::Gamma,
            "psi_f" => Axis::PsiF,
            "psi_h" => Axis::PsiH,
            "psi_p" => Axis::PsiP,
            "psi_e" => Axis::PsiE,
            "psi_rho" => Axis::PsiRho,
            other => bail!("unknown sweep axis `{other}`"),
        };
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("bad sweep value `{v}`: {e}")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        if values.is_empty() {
            bail!("empty sweep");
        }
        if axis == Axis::Gamma && values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            bail!("gamma values must be nonnegative integers");
        }
        if axis != Axis::Gamma && values.iter().any(|v| !(*v >= 0.0)) {
            bail!("scaling factors must be nonnegative");
        }
        Ok(Sweep { axis, values })
    }
}

fn scale(m: &mut Matrix, f: f64) {
    m.iter_mut().flatten().for_each(|x| *x *= f);
}

fn scale_vec(v: &mut [f64], f: f64) {
    v.iter_mut().for_each(|x| *x *= f);
}

/// Copy of `inst` with one cost parameter multiplied by `factor`.
pub fn scaled(inst: &Instance, axis: Axis, factor: f64) -> Instance {
    let mut out = inst.clone();
    let c = &mut out.costs;
    match axis {
        Axis::Gamma => {}
        Axis::PsiF => scale(&mut c.install_cost, factor),
        Axis::PsiH => {
            c.download_en.iter_mut().for_each(|m| scale(m, factor));
            scale(&mut c.download_cloud, factor);
        }
        Axis::PsiP => {
            scale(&mut c.reserve_price_edge, factor);
            scale_vec(&mut c.reserve_price_cloud, factor);
        }
        Axis::PsiE => {
            scale(&mut c.buy_price_edge, factor);
            scale_vec(&mut c.buy_price_cloud, factor);
        }
        Axis::PsiRho => c.delay_penalty *= factor,
    }
    out
}

/// Rows that cannot be solved (for instance a scaling that breaks the price
/// ordering) are written with an error message instead of aborting.
pub fn run(
    inst: &Instance,
    sweeps: &[Sweep],
    models: &[Baseline],
    opts: &Common,
    cfg: &RodConfig,
    out: impl Write,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "axis", "value", "model", "objective", "lower_bound", "gap", "converged", "payment", "adjustment", "wall_ms",
        "error",
    ])?;
    for sweep in sweeps {
        for &v in &sweep.values {
            let mut o = opts.clone();
            let inst = match sweep.axis {
                Axis::Gamma => {
                    o.gamma = Some(v as usize);
                    inst.clone()
                }
                axis => scaled(inst, axis, v),
            };
            for &m in models {
                let mut row = vec![sweep.axis.name().to_string(), v.to_string(), model_name(m).to_string()];
                let solved = inst.validate().map_err(anyhow::Error::from).and_then(|_| solve_one(&inst, m, &o, cfg));
                match solved {
                    Ok(r) => {
                        let (pay, adj) = r.breakdown.map_or((f64::NAN, f64::NAN), |b| (b.payment(), b.c2_adjust));
                        row.extend([
                            r.objective.to_string(),
                            r.lower_bound.to_string(),
                            r.gap.to_string(),
                            r.converged.to_string(),
                            pay.to_string(),
                            adj.to_string(),
                            format!("{:.1}", r.wall_ms),
                            String::new(),
                        ]);
                    }
                    Err(e) => {
                        warn!("{}={v} {}: {e:#}", sweep.axis.name(), model_name(m));
                        row.extend(std::iter::repeat_n(String::new(), 7));
                        row.push(format!("{e:#}"));
                    }
                }
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sweeps() {
        let s: Sweep = "gamma=0,1,2".parse().unwrap();
        assert_eq!(s.axis, Axis::Gamma);
        assert_eq!(s.values, vec![0.0, 1.0, 2.0]);
        assert!("gamma=1.5".parse::<Sweep>().is_err());
        assert!("psi_q=1".parse::<Sweep>().is_err());
        assert!("psi_p".parse::<Sweep>().is_err());
        assert_eq!("psi_e=0.5, 2".parse::<Sweep>().unwrap().values, vec![0.5, 2.0]);
    }
}
