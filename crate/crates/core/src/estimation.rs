//! Seasonal regression and per-area AR fitting for dynamic uncertainty sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Matrix, Traces};
use crate::uncertainty::DusSpec;

/// Daily and half-daily cycles at 20-minute slots.
pub const DEFAULT_CYCLES: [f64; 2] = [72.0, 36.0];

/// `[1, cos(2πt/P_1), sin(2πt/P_1), cos(2πt/P_2), ...]`.
pub fn seasonal_basis(t: f64, cycles: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + 2 * cycles.len());
    row.push(1.0);
    for &p in cycles {
        let a = 2.0 * std::f64::consts::PI * t / p;
        row.push(a.cos());
        row.push(a.sin());
    }
    row
}

pub fn seasonal_value(phi: &[f64], t: f64, cycles: &[f64]) -> f64 {
    seasonal_basis(t, cycles).iter().zip(phi).map(|(b, p)| b * p).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalFit {
    pub cycles: Vec<f64>,
    /// `[i][k]`
    pub phi: Matrix,
    /// `[i][n]`, observed minus fitted.
    pub residuals: Matrix,
    pub r_squared: Vec<f64>,
    /// Areas whose design matrix was rank deficient.
    pub flagged: Vec<usize>,
}

impl SeasonalFit {
    /// Forecast matrix `[i][t]` for periods `start, start+1, ...`.
    pub fn forecast(&self, start: i64, horizon: usize) -> Matrix {
        self.phi
            .iter()
            .map(|phi| (0..horizon).map(|k| seasonal_value(phi, (start + k as i64) as f64, &self.cycles)).collect())
            .collect()
    }
}

pub fn fit_seasonal(traces: &Traces, cycles: &[f64]) -> Result<SeasonalFit> {
    let n = traces.len();
    let longest = cycles.iter().copied().fold(1.0, f64::max);
    if (n as f64) < 2.0 * longest {
        return Err(Error::Estimation(format!(
            "seasonal fit needs two full cycles ({} periods), got {n}",
            (2.0 * longest).ceil()
        )));
    }
    check_finite(&traces.series)?;
    let k = 1 + 2 * cycles.len();
    let x = DMatrix::from_fn(n, k, |r, c| seasonal_basis(traces.periods[r] as f64, cycles)[c]);
    let svd = x.clone().svd(true, true);
    let rank = svd.rank(1e-10 * svd.singular_values.max());
    let mut fit = SeasonalFit {
        cycles: cycles.to_vec(),
        phi: Vec::new(),
        residuals: Vec::new(),
        r_squared: Vec::new(),
        flagged: Vec::new(),
    };
    for (i, series) in traces.series.iter().enumerate() {
        let y = DVector::from_column_slice(series);
        let beta = svd.solve(&y, 1e-12).map_err(|e| Error::Estimation(e.to_string()))?;
        let resid = &y - &x * &beta;
        let mean = y.mean();
        let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let rss = resid.norm_squared();
        fit.r_squared.push(if tss > 0.0 { 1.0 - rss / tss } else { 1.0 });
        if rank < k {
            fit.flagged.push(i);
        }
        fit.phi.push(beta.iter().copied().collect());
        fit.residuals.push(resid.iter().copied().collect());
    }
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    /// Seasonal coefficients `[i][k]`; empty when fitted on residuals directly.
    #[serde(default)]
    pub phi: Matrix,
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    pub seed: Matrix,
    #[serde(rename = "Sigma")]
    pub sigma: Matrix,
    /// Per-area R² of the lag regression.
    #[serde(default)]
    pub r_squared: Vec<f64>,
}

impl ArFit {
    pub fn lag(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn to_dus(&self, budget: usize) -> DusSpec {
        DusSpec {
            lag: self.lag(),
            ar: self.a.clone(),
            mixing: self.b.clone(),
            seed: self.seed.clone(),
            budget,
            clip_negative: false,
        }
    }
}

/// Per-area lag regression without intercept, sample covariance of the
/// innovations, lower Cholesky factor.
pub fn fit_ar(residuals: &Matrix, lag: usize) -> Result<ArFit> {
    let i_n = residuals.len();
    if lag < 1 {
        return Err(Error::Estimation("lag must be at least 1".into()));
    }
    if i_n == 0 {
        return Err(Error::Estimation("no series supplied".into()));
    }
    let n = residuals[0].len();
    if residuals.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("residual series have different lengths".into()));
    }
    if n < 10 * lag * i_n {
        return Err(Error::Estimation(format!("series too short: {n} < {}", 10 * lag * i_n)));
    }
    check_finite(residuals)?;

    let m = n - lag;
    let mut a = Vec::with_capacity(i_n);
    let mut innov = DMatrix::zeros(m, i_n);
    let mut r_squared = Vec::with_capacity(i_n);
    for (i, r) in residuals.iter().enumerate() {
        let x = DMatrix::from_fn(m, lag, |row, s| r[lag + row - s - 1]);
        let y = DVector::from_fn(m, |row, _| r[lag + row]);
        let coef = x
            .clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::Estimation(format!("area {i}: {e}")))?;
        let e = &y - &x * &coef;
        let tss = y.norm_squared();
        r_squared.push(if tss > 0.0 { 1.0 - e.norm_squared() / tss } else { 1.0 });
        innov.set_column(i, &e);
        a.push(coef.iter().copied().collect::<Vec<_>>());
    }

    let mean = innov.row_mean();
    let centered = DMatrix::from_fn(m, i_n, |r, c| innov[(r, c)] - mean[c]);
    let sigma = centered.transpose() * &centered / (m as f64 - 1.0);
    let chol = match sigma.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * sigma.trace() / i_n as f64;
            let bumped = &sigma + DMatrix::identity(i_n, i_n) * jitter.max(f64::MIN_POSITIVE);
            bumped
                .cholesky()
                .ok_or_else(|| Error::Estimation("innovation covariance is not positive semidefinite".into()))?
        }
    };
    let b = chol.l();
    let to_rows = |m: &DMatrix<f64>| -> Matrix { (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect() };
    Ok(ArFit {
        phi: Vec::new(),
        a,
        b: to_rows(&b),
        seed: residuals.iter().map(|r| r[n - lag..].to_vec()).collect(),
        sigma: to_rows(&sigma),
        r_squared,
    })
}

/// Seasonal fit followed by AR fitting on its residuals.
pub fn fit_traces(traces: &Traces, lag: usize, cycles: &[f64]) -> Result<(SeasonalFit, ArFit)> {
    let seasonal = fit_seasonal(traces, cycles)?;
    let mut ar = fit_ar(&seasonal.residuals, lag)?;
    ar.phi = seasonal.phi.clone();
    Ok((seasonal, ar))
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Estimation("series contain non-finite values".into()));
    }
    Ok(())
}
