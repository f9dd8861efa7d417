//! Static and dynamic uncertainty sets over budgeted deviation drivers.
//!
//! A realization is driven by `g[i][t] ∈ {-1, 0, +1}` with at most `Γ`
//! nonzero entries per period. The static set deviates each area
//! independently; the dynamic set feeds `B g` through a per-area AR(L)
//! recursion, so deviations persist and spread across areas.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Matrix;

/// Default refusal threshold for exhaustive enumeration.
pub const DEFAULT_CANDIDATE_CAP: u128 = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusSpec {
    /// `[i][t]` deviation amplitude.
    pub deviation: Matrix,
    pub budget: usize,
    #[serde(default)]
    pub clip_negative: bool,
}

impl SusSpec {
    /// Deviation sized as a fraction `alpha` of the forecast.
    pub fn from_alpha(forecast: &Matrix, alpha: f64, budget: usize) -> SusSpec {
        SusSpec {
            deviation: forecast.iter().map(|r| r.iter().map(|&x| alpha * x).collect()).collect(),
            budget,
            clip_negative: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DusSpec {
    pub lag: usize,
    /// `[i][s-1]` for lags `s = 1..=L`.
    pub ar: Matrix,
    /// `[i][i']`, innovation `ε^t = B g^t`.
    pub mixing: Matrix,
    /// `[i][k]`, residuals at `τ = k + 1 - L`, oldest first.
    pub seed: Matrix,
    pub budget: usize,
    #[serde(default)]
    pub clip_negative: bool,
}

impl DusSpec {
    /// Memoryless spec with diagonal mixing: coincides with a static set whose
    /// deviation is `amplitude[i]` in every period.
    pub fn memoryless(amplitude: &[f64], lag: usize, budget: usize) -> DusSpec {
        let n = amplitude.len();
        DusSpec {
            lag,
            ar: vec![vec![0.0; lag]; n],
            mixing: (0..n).map(|i| (0..n).map(|k| if i == k { amplitude[i] } else { 0.0 }).collect()).collect(),
            seed: vec![vec![0.0; lag]; n],
            budget,
            clip_negative: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum UncertaintySpec {
    Sus(SusSpec),
    Dus(DusSpec),
}

impl UncertaintySpec {
    pub fn budget(&self) -> usize {
        match self {
            UncertaintySpec::Sus(s) => s.budget,
            UncertaintySpec::Dus(d) => d.budget,
        }
    }

    pub fn with_budget(&self, budget: usize) -> UncertaintySpec {
        let mut out = self.clone();
        match &mut out {
            UncertaintySpec::Sus(s) => s.budget = budget,
            UncertaintySpec::Dus(d) => d.budget = budget,
        }
        out
    }

    pub fn clip_negative(&self) -> bool {
        match self {
            UncertaintySpec::Sus(s) => s.clip_negative,
            UncertaintySpec::Dus(d) => d.clip_negative,
        }
    }

    pub fn violations(&self, ap_count: usize, horizon: usize) -> Vec<String> {
        let mut v = Vec::new();
        let budget = self.budget();
        if budget > ap_count {
            v.push(format!("uncertainty.budget {budget} exceeds the number of areas {ap_count}"));
        }
        let shape = |v: &mut Vec<String>, name: &str, m: &Matrix, rows: usize, cols: usize| {
            if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                v.push(format!("uncertainty.{name} must be {rows}x{cols}"));
            } else if m.iter().flatten().any(|x| !x.is_finite()) {
                v.push(format!("uncertainty.{name} has non-finite entries"));
            }
        };
        match self {
            UncertaintySpec::Sus(s) => {
                shape(&mut v, "deviation", &s.deviation, ap_count, horizon);
                if s.deviation.iter().flatten().any(|&x| x < 0.0) {
                    v.push("uncertainty.deviation must be nonnegative".into());
                }
            }
            UncertaintySpec::Dus(d) => {
                if d.lag < 1 {
                    v.push("uncertainty.lag must be at least 1".into());
                }
                shape(&mut v, "ar", &d.ar, ap_count, d.lag);
                shape(&mut v, "mixing", &d.mixing, ap_count, ap_count);
                shape(&mut v, "seed", &d.seed, ap_count, d.lag);
            }
        }
        v
    }

    /// Demand under driver `g`, including optional clipping.
    pub fn realize(&self, forecast: &Matrix, g: &Candidate) -> Result<Matrix> {
        let (i_n, t_n) = dims(forecast);
        g.check(i_n, t_n, self.budget())?;
        let mut lambda = match self {
            UncertaintySpec::Sus(s) => {
                if s.deviation.len() != i_n || s.deviation.iter().any(|r| r.len() != t_n) {
                    return Err(Error::Dimension(format!("deviation must be {i_n}x{t_n}")));
                }
                (0..i_n)
                    .map(|i| (0..t_n).map(|t| forecast[i][t] + g.g[i][t] as f64 * s.deviation[i][t]).collect())
                    .collect()
            }
            UncertaintySpec::Dus(d) => {
                let drive: Vec<Vec<f64>> =
                    g.g.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
                let resid = dus_residuals(d, &drive, t_n, true)?;
                (0..i_n).map(|i| (0..t_n).map(|t| forecast[i][t] + resid[i][t]).collect()).collect::<Matrix>()
            }
        };
        if self.clip_negative() {
            for x in lambda.iter_mut().flatten() {
                *x = x.max(0.0);
            }
        }
        Ok(lambda)
    }

    /// Affine map from drivers to unclipped demand.
    pub fn affine_map(&self, forecast: &Matrix) -> Result<AffineDemandMap> {
        match self {
            UncertaintySpec::Sus(s) => Ok(AffineDemandMap::memoryless(forecast, &s.deviation)),
            UncertaintySpec::Dus(d) => unroll_affine(d, forecast),
        }
    }
}

fn dims(m: &Matrix) -> (usize, usize) {
    (m.len(), m.first().map_or(0, Vec::len))
}

/// Residual recursion `r^t = Σ_s A_s ∘ r^{t-s} + B drive^t`, optionally seeded.
pub(crate) fn dus_residuals(d: &DusSpec, drive: &Matrix, t_n: usize, seeded: bool) -> Result<Matrix> {
    let i_n = d.mixing.len();
    if drive.len() != i_n || d.ar.len() != i_n || d.seed.len() != i_n {
        return Err(Error::Dimension(format!("dynamic set has {i_n} areas, drivers have {}", drive.len())));
    }
    let l = d.lag;
    let mut r = vec![vec![0.0; t_n]; i_n];
    for t in 0..t_n {
        for i in 0..i_n {
            let mut x: f64 = (0..i_n).map(|k| d.mixing[i][k] * drive[k][t]).sum();
            for s in 1..=l {
                let past = if t >= s {
                    r[i][t - s]
                } else if seeded {
                    d.seed[i][l + t - s]
                } else {
                    0.0
                };
                x += d.ar[i][s - 1] * past;
            }
            r[i][t] = x;
        }
    }
    Ok(r)
}

/// `λ[i][t] = offset[i][t] + Σ_{i', τ ≤ t} Ψ[(i,t),(i',τ)] g[i'][τ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineDemandMap {
    pub ap_count: usize,
    pub horizon: usize,
    pub offset: Matrix,
    /// Dense row-major over flattened `(i,t)` × `(i',τ)`, index `i*T + t`.
    psi: Vec<f64>,
}

impl AffineDemandMap {
    pub fn memoryless(forecast: &Matrix, deviation: &Matrix) -> AffineDemandMap {
        let (i_n, t_n) = dims(forecast);
        let n = i_n * t_n;
        let mut psi = vec![0.0; n * n];
        for i in 0..i_n {
            for t in 0..t_n {
                let k = i * t_n + t;
                psi[k * n + k] = deviation[i][t];
            }
        }
        AffineDemandMap { ap_count: i_n, horizon: t_n, offset: forecast.clone(), psi }
    }

    pub fn psi(&self, i: usize, t: usize, i2: usize, tau: usize) -> f64 {
        let n = self.ap_count * self.horizon;
        self.psi[(i * self.horizon + t) * n + i2 * self.horizon + tau]
    }

    /// Nonzero `(i', τ, Ψ)` entries driving demand at `(i, t)`.
    pub fn row(&self, i: usize, t: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.ap_count * self.horizon;
        let base = (i * self.horizon + t) * n;
        self.psi[base..base + n].iter().enumerate().filter(|(_, &v)| v != 0.0).map(move |(k, &v)| {
            (k / self.horizon, k % self.horizon, v)
        })
    }

    pub fn apply(&self, g: &Candidate) -> Matrix {
        (0..self.ap_count)
            .map(|i| {
                (0..self.horizon)
                    .map(|t| self.offset[i][t] + self.row(i, t).map(|(k, tau, p)| p * g.g[k][tau] as f64).sum::<f64>())
                    .collect()
            })
            .collect()
    }

    /// Largest `λ[i][t]` over drivers with at most `budget` nonzeros per
    /// period.
    pub fn max_demand(&self, budget: usize) -> Matrix {
        (0..self.ap_count)
            .map(|i| {
                (0..self.horizon)
                    .map(|t| {
                        let mut by_period = vec![Vec::new(); self.horizon];
                        for (_, tau, p) in self.row(i, t) {
                            by_period[tau].push(p.abs());
                        }
                        let spread: f64 = by_period
                            .iter_mut()
                            .map(|col| {
                                col.sort_by(|a, b| b.total_cmp(a));
                                col.iter().take(budget).sum::<f64>()
                            })
                            .sum();
                        self.offset[i][t] + spread
                    })
                    .collect()
            })
            .collect()
    }

    /// Sensitivity of total demand to each driver.
    pub fn column_sums(&self) -> Matrix {
        let mut w = vec![vec![0.0; self.horizon]; self.ap_count];
        for i in 0..self.ap_count {
            for t in 0..self.horizon {
                for (k, tau, p) in self.row(i, t) {
                    w[k][tau] += p;
                }
            }
        }
        w
    }
}

/// Unrolls the AR recursion into an explicit affine map. Seed propagation
/// goes into the offset, impulse responses into `Ψ`.
pub fn unroll_affine(d: &DusSpec, forecast: &Matrix) -> Result<AffineDemandMap> {
    let (i_n, t_n) = dims(forecast);
    let zero = vec![vec![0.0; t_n]; i_n];
    let base = dus_residuals(d, &zero, t_n, true)?;
    let offset: Matrix = (0..i_n).map(|i| (0..t_n).map(|t| forecast[i][t] + base[i][t]).collect()).collect();
    let n = i_n * t_n;
    let mut psi = vec![0.0; n * n];
    let mut drive = zero;
    for k in 0..i_n {
        for tau in 0..t_n {
            drive[k][tau] = 1.0;
            let resp = dus_residuals(d, &drive, t_n, false)?;
            drive[k][tau] = 0.0;
            for i in 0..i_n {
                for t in tau..t_n {
                    psi[(i * t_n + t) * n + k * t_n + tau] = resp[i][t];
                }
            }
        }
    }
    Ok(AffineDemandMap { ap_count: i_n, horizon: t_n, offset, psi })
}

/// One vertex of the budgeted driver set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    /// `[i][t]` in `{-1, 0, 1}`.
    pub g: Vec<Vec<i8>>,
}

impl Candidate {
    pub fn zeros(ap_count: usize, horizon: usize) -> Candidate {
        Candidate { g: vec![vec![0; horizon]; ap_count] }
    }

    pub fn check(&self, ap_count: usize, horizon: usize, budget: usize) -> Result<()> {
        if self.g.len() != ap_count || self.g.iter().any(|r| r.len() != horizon) {
            return Err(Error::Dimension(format!("driver must be {ap_count}x{horizon}")));
        }
        if self.g.iter().flatten().any(|&x| !(-1..=1).contains(&x)) {
            return Err(Error::Budget("driver entries must lie in {-1, 0, 1}".into()));
        }
        for t in 0..horizon {
            let used = self.g.iter().filter(|r| r[t] != 0).count();
            if used > budget {
                return Err(Error::Budget(format!("period {t} uses {used} deviations, budget is {budget}")));
            }
        }
        Ok(())
    }

    /// Short stable fingerprint for logs.
    pub fn digest(&self) -> String {
        let mut h = DefaultHasher::new();
        self.g.hash(&mut h);
        format!("{:016x}", h.finish())
    }
}

/// Number of budgeted vertices, saturating.
pub fn candidate_count(ap_count: usize, horizon: usize, budget: usize) -> u128 {
    let mut per_period: u128 = 0;
    let mut binom: u128 = 1;
    for k in 0..=budget.min(ap_count) {
        if k > 0 {
            binom = binom * (ap_count - k + 1) as u128 / k as u128;
        }
        per_period = per_period.saturating_add(binom.saturating_mul(1u128 << k.min(127)));
    }
    let mut total: u128 = 1;
    for _ in 0..horizon {
        total = total.saturating_mul(per_period);
    }
    total
}

/// Every budgeted vertex, in a fixed order. Refuses when the count exceeds `cap`.
pub fn enumerate_candidates(ap_count: usize, horizon: usize, budget: usize, cap: u128) -> Result<Vec<Candidate>> {
    if budget > ap_count {
        return Err(Error::Budget(format!("budget {budget} exceeds the number of areas {ap_count}")));
    }
    let count = candidate_count(ap_count, horizon, budget);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    // all per-period columns with at most `budget` nonzeros
    let mut columns: Vec<Vec<i8>> = Vec::new();
    let mut col = vec![0i8; ap_count];
    loop {
        if col.iter().filter(|&&x| x != 0).count() <= budget {
            columns.push(col.clone());
        }
        // odometer over {-1, 0, 1}^I in the order 0, 1, -1
        let mut k = 0;
        while k < ap_count {
            col[k] = match col[k] {
                0 => 1,
                1 => -1,
                _ => 0,
            };
            if col[k] != 0 {
                break;
            }
            k += 1;
        }
        if k == ap_count {
            break;
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut pick = vec![0usize; horizon];
    loop {
        let g = (0..ap_count).map(|i| (0..horizon).map(|t| columns[pick[t]][i]).collect()).collect();
        out.push(Candidate { g });
        let mut t = 0;
        while t < horizon {
            pick[t] += 1;
            if pick[t] < columns.len() {
                break;
            }
            pick[t] = 0;
            t += 1;
        }
        if t == horizon {
            break;
        }
    }
    Ok(out)
}

/// Driver maximizing total unclipped demand. Total demand is separable across
/// periods and linear in `g`, so each period takes the `Γ` drivers with the
/// largest absolute sensitivity, signed to match.
pub fn extreme_total_demand(spec: &UncertaintySpec, forecast: &Matrix) -> Result<(Candidate, Matrix)> {
    let map = spec.affine_map(forecast)?;
    let w = map.column_sums();
    let (i_n, t_n) = dims(forecast);
    let mut g = Candidate::zeros(i_n, t_n);
    for t in 0..t_n {
        let mut order: Vec<usize> = (0..i_n).filter(|&i| w[i][t] != 0.0).collect();
        order.sort_by(|&a, &b| w[b][t].abs().total_cmp(&w[a][t].abs()).then(a.cmp(&b)));
        for &i in order.iter().take(spec.budget()) {
            g.g[i][t] = if w[i][t] > 0.0 { 1 } else { -1 };
        }
    }
    let lambda = spec.realize(forecast, &g)?;
    Ok((g, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_ar(a: f64, budget: usize) -> UncertaintySpec {
        UncertaintySpec::Dus(DusSpec {
            lag: 1,
            ar: vec![vec![a]],
            mixing: vec![vec![1.0]],
            seed: vec![vec![0.0]],
            budget,
            clip_negative: false,
        })
    }

    #[test]
    fn sus_zero_driver_returns_forecast() {
        let spec = UncertaintySpec::Sus(SusSpec { deviation: vec![vec![2.0]], budget: 1, clip_negative: false });
        let lam = spec.realize(&vec![vec![10.0]], &Candidate::zeros(1, 1)).unwrap();
        assert_eq!(lam, vec![vec![10.0]]);
    }

    #[test]
    fn scalar_ar_recursion() {
        let spec = scalar_ar(0.5, 1);
        let g = Candidate { g: vec![vec![1, 1]] };
        let lam = spec.realize(&vec![vec![3.0, 4.0]], &g).unwrap();
        assert_eq!(lam, vec![vec![4.0, 5.5]]);
    }

    #[test]
    fn scalar_ar_impulse_response() {
        let UncertaintySpec::Dus(d) = scalar_ar(0.5, 1) else { unreachable!() };
        let map = unroll_affine(&d, &vec![vec![0.0; 4]]).unwrap();
        for t in 0..4 {
            for tau in 0..4 {
                let want = if tau <= t { 0.5f64.powi((t - tau) as i32) } else { 0.0 };
                assert_eq!(map.psi(0, t, 0, tau), want);
            }
        }
    }

    #[test]
    fn seed_feeds_offset() {
        let spec = DusSpec {
            lag: 2,
            ar: vec![vec![0.5, 0.25]],
            mixing: vec![vec![1.0]],
            seed: vec![vec![4.0, 2.0]],
            budget: 1,
            clip_negative: false,
        };
        // r1 = 0.5*2 + 0.25*4 = 2, r2 = 0.5*2 + 0.25*2 = 1.5
        let map = unroll_affine(&spec, &vec![vec![10.0, 10.0]]).unwrap();
        assert_eq!(map.offset, vec![vec![12.0, 11.5]]);
    }

    #[test]
    fn budget_and_domain_checked() {
        let spec = UncertaintySpec::Sus(SusSpec { deviation: vec![vec![1.0], vec![1.0]], budget: 1, clip_negative: false });
        let both = Candidate { g: vec![vec![1], vec![-1]] };
        assert!(matches!(spec.realize(&vec![vec![1.0], vec![1.0]], &both), Err(Error::Budget(_))));
        let bad = Candidate { g: vec![vec![2], vec![0]] };
        assert!(matches!(spec.realize(&vec![vec![1.0], vec![1.0]], &bad), Err(Error::Budget(_))));
    }

    #[test]
    fn clipping_floors_at_zero() {
        let spec = UncertaintySpec::Sus(SusSpec { deviation: vec![vec![5.0]], budget: 1, clip_negative: true });
        let lam = spec.realize(&vec![vec![2.0]], &Candidate { g: vec![vec![-1]] }).unwrap();
        assert_eq!(lam, vec![vec![0.0]]);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_candidates(2, 1, 1, 100).unwrap().len(), 5);
        assert_eq!(enumerate_candidates(2, 1, 2, 100).unwrap().len(), 9);
        assert_eq!(enumerate_candidates(1, 2, 1, 100).unwrap().len(), 9);
        assert_eq!(candidate_count(2, 2, 1), 25);
        assert_eq!(candidate_count(3, 2, 1), 49);
        assert!(matches!(enumerate_candidates(3, 4, 3, 1000), Err(Error::CapExceeded { count: 531441, .. })));
    }

    #[test]
    fn extreme_scenarios() {
        let spec = UncertaintySpec::Sus(SusSpec { deviation: vec![vec![2.0], vec![5.0]], budget: 1, clip_negative: false });
        let (g, lam) = extreme_total_demand(&spec, &vec![vec![10.0], vec![8.0]]).unwrap();
        assert_eq!(g.g, vec![vec![0], vec![1]]);
        assert_eq!(lam.iter().flatten().sum::<f64>(), 23.0);

        let (g, _) = extreme_total_demand(&spec.with_budget(0), &vec![vec![10.0], vec![8.0]]).unwrap();
        assert_eq!(g, Candidate::zeros(2, 1));

        let (g, _) = extreme_total_demand(&scalar_ar(0.5, 1), &vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.g, vec![vec![1, 1]]);
    }

    #[test]
    fn spec_json_is_tagged() {
        let spec = scalar_ar(0.5, 1);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.starts_with(r#"{"type":"dus""#), "{text}");
        let back: UncertaintySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
