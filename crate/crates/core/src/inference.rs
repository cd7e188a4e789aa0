//! Bartlett (Newey-West) long-run variances, HAC standard errors for the
//! closed-form and regression estimators, and normal t-tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{AttEstimate, Inference};
use crate::linalg::Matrix;
use crate::panel::Regime;
use crate::regression::WlsFit;
use crate::stats::two_sided_normal_p;
use crate::weights::RegimeWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// Data-driven AR(1) plug-in lag, see [`plug_in_lag`].
    #[default]
    Auto,
    /// `floor(4 (n/100)^(2/9))`.
    Rule,
    Fixed(usize),
}

/// Bartlett-kernel HAC settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HacSpec {
    pub bandwidth: Bandwidth,
}

impl HacSpec {
    pub fn auto() -> Self {
        HacSpec { bandwidth: Bandwidth::Auto }
    }

    pub fn fixed(lag: usize) -> Self {
        HacSpec {
            bandwidth: Bandwidth::Fixed(lag),
        }
    }

    pub fn rule() -> Self {
        HacSpec { bandwidth: Bandwidth::Rule }
    }

    /// Lag for a series of length `n` without looking at the data; the
    /// data-driven choice falls back to the fixed rule.
    pub fn lag(&self, n: usize) -> usize {
        match self.bandwidth {
            Bandwidth::Fixed(l) => l,
            Bandwidth::Auto | Bandwidth::Rule => automatic_lag(n),
        }
    }

    /// Lag for the given columns (one column per score or series).
    pub fn select_lag(&self, columns: &[Vec<f64>]) -> usize {
        match self.bandwidth {
            Bandwidth::Auto => plug_in_lag(columns),
            _ => self.lag(columns.first().map_or(0, |c| c.len())),
        }
    }

    pub fn select_lag_series(&self, series: &[f64]) -> usize {
        match self.bandwidth {
            Bandwidth::Auto => plug_in_lag(std::slice::from_ref(&series.to_vec())),
            _ => self.lag(series.len()),
        }
    }
}

/// Fixed bandwidth rule `floor(4 (n/100)^(2/9))`.
pub fn automatic_lag(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Bartlett plug-in lag from AR(1) fits to each column (Andrews 1991):
/// `S = 1.1447 (alpha n)^(1/3)` with
/// `alpha = sum 4 rho^2 s^4 / ((1-rho)^6 (1+rho)^2) / sum s^4 / (1-rho)^4`.
/// Returns `floor(S)`, capped at `n - 2`. All-zero columns are ignored.
pub fn plug_in_lag(columns: &[Vec<f64>]) -> usize {
    let n = columns.first().map_or(0, |c| c.len());
    if n < 3 {
        return 0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for z in columns {
        let zz: f64 = z[..n - 1].iter().map(|v| v * v).sum();
        if !(zz > 0.0) {
            continue;
        }
        let rho = ((1..n).map(|t| z[t] * z[t - 1]).sum::<f64>() / zz).clamp(-0.97, 0.97);
        let s2 = (1..n).map(|t| (z[t] - rho * z[t - 1]).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s4 = s2 * s2;
        num += 4.0 * rho * rho * s4 / ((1.0 - rho).powi(6) * (1.0 + rho).powi(2));
        den += s4 / (1.0 - rho).powi(4);
    }
    if !(den > 0.0) {
        return 0;
    }
    let s = 1.1447 * (num / den * n as f64).powf(1.0 / 3.0);
    (s.floor() as usize).min(n - 2)
}

/// Bartlett weight `1 - l/(L+1)`.
pub fn bartlett_weight(l: usize, lag: usize) -> f64 {
    1.0 - l as f64 / (lag as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRunVariance {
    pub value: f64,
    pub lag: usize,
    /// Set when the raw estimate was negative and truncated to zero.
    pub degenerate: bool,
}

fn check_lag(n: usize, lag: usize) -> Result<()> {
    if n < 2 || lag + 1 >= n {
        return Err(Error::Parameter(format!(
            "HAC lag {lag} too large for a series of length {n}"
        )));
    }
    Ok(())
}

fn autocov_sum(z: &[f64], lag: usize) -> f64 {
    let n = z.len();
    let mut total: f64 = z.iter().map(|v| v * v).sum();
    for l in 1..=lag {
        let g: f64 = (l..n).map(|t| z[t] * z[t - l]).sum();
        total += 2.0 * bartlett_weight(l, lag) * g;
    }
    total
}

/// `gamma_0 + 2 sum_l (1 - l/(L+1)) gamma_l` of the demeaned series, with
/// autocovariances normalized by the series length.
pub fn nw_long_run_variance(series: &[f64], spec: &HacSpec) -> Result<LongRunVariance> {
    let n = series.len();
    let m = series.iter().sum::<f64>() / n.max(1) as f64;
    let z: Vec<f64> = series.iter().map(|v| v - m).collect();
    let lag = spec.select_lag_series(&z);
    check_lag(n, lag)?;
    let raw = autocov_sum(&z, lag) / n as f64;
    Ok(LongRunVariance {
        value: raw.max(0.0),
        lag,
        degenerate: raw < 0.0,
    })
}

/// Multivariate Bartlett long-run covariance of the columns (not demeaned),
/// normalized by the series length.
pub fn long_run_covariance(columns: &[Vec<f64>], lag: usize) -> Result<Matrix> {
    let k = columns.len();
    let n = columns.first().map_or(0, |c| c.len());
    check_lag(n, lag)?;
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Validation("columns of unequal length".into()));
    }
    let mut s = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut v: f64 = (0..n).map(|t| columns[i][t] * columns[j][t]).sum();
            for l in 1..=lag {
                let w = bartlett_weight(l, lag);
                let g_ij: f64 = (l..n).map(|t| columns[i][t] * columns[j][t - l]).sum();
                let g_ji: f64 = (l..n).map(|t| columns[j][t] * columns[i][t - l]).sum();
                v += w * (g_ij + g_ji);
            }
            s[(i, j)] = v / n as f64;
        }
    }
    Ok(s.symmetrized())
}

/// The series `omega_t (s_t - m_r(t))` whose long-run sum gives the variance
/// of `sum_t omega_t s_t`; `m_r` is the omega-weighted mean of the regime.
/// Zero in the transition window and wherever omega is zero.
pub fn regime_demeaned_weighted(series: &[f64], omega: &[f64], regimes: &[Regime]) -> Vec<f64> {
    let mean_of = |target: Regime| {
        let (num, den) = series
            .iter()
            .zip(omega)
            .zip(regimes)
            .filter(|(_, r)| **r == target)
            .fold((0.0, 0.0), |(a, b), ((s, w), _)| (a + w.abs() * s, b + w.abs()));
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let (m_pre, m_post) = (mean_of(Regime::Pre), mean_of(Regime::Post));
    series
        .iter()
        .zip(omega)
        .zip(regimes)
        .map(|((s, w), r)| match r {
            Regime::Pre => w * (s - m_pre),
            Regime::Post => w * (s - m_post),
            Regime::Transition => 0.0,
        })
        .collect()
}

/// HAC variance of the linear contrast `sum_t omega_t s_t`.
///
/// Applies the long-run variance to `n omega_t (s_t - regime mean)` and
/// rescales; `n` is the number of stored periods.
pub fn contrast_variance(
    series: &[f64],
    omega: &[f64],
    regimes: &[Regime],
    spec: &HacSpec,
) -> Result<LongRunVariance> {
    let n = series.len();
    let nf = n as f64;
    let z: Vec<f64> = regime_demeaned_weighted(series, omega, regimes)
        .into_iter()
        .map(|v| nf * v)
        .collect();
    let lrv = nw_long_run_variance(&z, spec)?;
    Ok(LongRunVariance {
        value: lrv.value / nf,
        ..lrv
    })
}

fn inference_from_variance(point: f64, var: f64, lag: usize, degenerate: bool) -> Result<Inference> {
    let se = var.max(0.0).sqrt();
    if !(se > 0.0) || !se.is_finite() || se <= 1e-14 * point.abs() {
        return Err(Error::Inference {
            point,
            reason: "estimated variance is zero (degenerate series)".into(),
        });
    }
    let t = point / se;
    Ok(Inference {
        hac_se: se,
        t_stat: t,
        p_value: two_sided_normal_p(t),
        lag,
        degenerate,
    })
}

/// Attaches a HAC standard error to an estimate of the form
/// `sum_t omega_t s_t` (T-DiD on the gap, BA on a unit, SC with zero pre
/// weights).
pub fn attach_inference(
    mut estimate: AttEstimate,
    series: &[f64],
    weights: &RegimeWeights,
    regimes: &[Regime],
    spec: &HacSpec,
) -> Result<AttEstimate> {
    let v = contrast_variance(series, &weights.omega, regimes, spec)?;
    estimate.inference = Some(inference_from_variance(estimate.point, v.value, v.lag, v.degenerate)?);
    Ok(estimate)
}

/// HAC sandwich `G^-1 Omega G^-1` for a weighted regression, where Omega is
/// the Bartlett long-run sum of the scores `w_t x_t u_t` (time order kept).
pub fn hac_sandwich(fit: &WlsFit, spec: &HacSpec) -> Result<(Matrix, usize)> {
    let n = fit.residuals.len();
    let k = fit.coef.len();
    let scores: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..n)
                .map(|t| fit.weights[t] * fit.x[t][j] * fit.residuals[t])
                .collect()
        })
        .collect();
    let lag = spec.select_lag(&scores);
    let omega = long_run_covariance(&scores, lag)?.scale(n as f64);
    let cov = fit.gram_inv.matmul(&omega).matmul(&fit.gram_inv).symmetrized();
    Ok((cov, lag))
}

/// Fills in HAC standard errors for the ATT coefficient and every auxiliary
/// coefficient of a regression-based estimate.
pub fn regression_inference(
    mut estimate: AttEstimate,
    fit: &WlsFit,
    att_name: &str,
    spec: &HacSpec,
) -> Result<AttEstimate> {
    let (cov, lag) = hac_sandwich(fit, spec)?;
    for c in estimate.aux.iter_mut() {
        if let Some(i) = fit.names.iter().position(|n| *n == c.name) {
            c.se = Some(cov[(i, i)].max(0.0).sqrt());
        }
    }
    let i = fit
        .names
        .iter()
        .position(|n| n == att_name)
        .ok_or_else(|| Error::Validation(format!("no coefficient named '{att_name}'")))?;
    let var = cov[(i, i)];
    estimate.inference = Some(inference_from_variance(estimate.point, var, lag, var < 0.0)?);
    Ok(estimate)
}

/// Attaches inference from an externally computed variance.
pub fn attach_variance(mut estimate: AttEstimate, variance: f64, lag: usize) -> Result<AttEstimate> {
    estimate.inference = Some(inference_from_variance(estimate.point, variance, lag, false)?);
    Ok(estimate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub point: f64,
    pub se: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject_1: bool,
    pub reject_5: bool,
    pub reject_10: bool,
}

impl TestRecord {
    pub fn from_statistic(name: impl Into<String>, point: f64, se: f64, statistic: f64) -> Self {
        let p = two_sided_normal_p(statistic);
        TestRecord {
            name: name.into(),
            point,
            se,
            statistic,
            p_value: p,
            reject_1: p < 0.01,
            reject_5: p < 0.05,
            reject_10: p < 0.10,
        }
    }

    /// Rejection at the nominal level (0.01, 0.05 or 0.10; other levels use
    /// the p-value directly).
    pub fn rejects_at(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Two-sided normal t-test of `point = null_value`.
pub fn t_test(estimate: &AttEstimate, null_value: f64) -> Result<TestRecord> {
    let se = estimate.hac_se().ok_or_else(|| Error::Inference {
        point: estimate.point,
        reason: "no standard error attached".into(),
    })?;
    if !(se > 0.0) {
        return Err(Error::Inference {
            point: estimate.point,
            reason: "standard error is zero".into(),
        });
    }
    Ok(TestRecord::from_statistic(
        "t-test",
        estimate.point,
        se,
        (estimate.point - null_value) / se,
    ))
}
