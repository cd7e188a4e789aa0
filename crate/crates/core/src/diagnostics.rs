//! Unit-root, stationarity and serial-correlation diagnostics for the series
//! an estimator relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{tdid_wls_design, EstimatorKind, TransformKind};
use crate::panel::Panel;
use crate::pipeline::EstimationSettings;
use crate::regression::WlsDesign;
use crate::stats::{normal_cdf, two_sided_normal_p};
use crate::transforms::{ar1_augment_design, detrend_design, first_difference};
use crate::weights::RegimeWeights;

/// Deterministic terms in the ADF and KPSS regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deterministic {
    Constant,
    #[default]
    ConstantTrend,
}

impl Deterministic {
    fn n_terms(&self) -> usize {
        match self {
            Deterministic::Constant => 1,
            Deterministic::ConstantTrend => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagChoice {
    /// Smallest AIC up to `12 (n/100)^(1/4)`.
    #[default]
    Aic,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lag: usize,
    pub deterministic: Deterministic,
}

/// Where a tabulated p-value was cut off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Censoring {
    None,
    /// True p-value is at least the reported one.
    AtLeast,
    /// True p-value is at most the reported one.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpssResult {
    pub statistic: f64,
    pub p_value: f64,
    pub censoring: Censoring,
    pub bandwidth: usize,
    pub deterministic: Deterministic,
}

impl KpssResult {
    /// `">= 0.10"`, `"<= 0.01"` or the interpolated value.
    pub fn p_label(&self) -> String {
        match self.censoring {
            Censoring::None => format!("{:.3}", self.p_value),
            Censoring::AtLeast => format!(">= {:.2}", self.p_value),
            Censoring::AtMost => format!("<= {:.2}", self.p_value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub adf: AdfResult,
    pub kpss: KpssResult,
    pub dw: DwResult,
}

struct Surface {
    tau_max: f64,
    tau_min: f64,
    tau_star: f64,
    small: [f64; 3],
    large: [f64; 4],
}

// Response-surface coefficients for the one-variable Dickey-Fuller
// distribution (MacKinnon 1994).
const SURFACE_C: Surface = Surface {
    tau_max: 2.74,
    tau_min: -18.83,
    tau_star: -1.61,
    small: [2.1659, 1.4412, 0.038269],
    large: [1.7339, 0.93202, -0.12745, -0.010368],
};

const SURFACE_CT: Surface = Surface {
    tau_max: 0.70,
    tau_min: -16.18,
    tau_star: -2.89,
    small: [3.2512, 1.6047, 0.049588],
    large: [2.5261, 0.61654, -0.37956, -0.060285],
};

fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// Approximate p-value of an ADF statistic.
pub fn adf_p_value(stat: f64, det: Deterministic) -> f64 {
    let s = match det {
        Deterministic::Constant => &SURFACE_C,
        Deterministic::ConstantTrend => &SURFACE_CT,
    };
    if stat > s.tau_max {
        1.0
    } else if stat < s.tau_min {
        0.0
    } else if stat <= s.tau_star {
        normal_cdf(polyval(&s.small, stat))
    } else {
        normal_cdf(polyval(&s.large, stat))
    }
}

fn schwert_bound(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// ADF regression of `dy_t` on the deterministic terms, `y_{t-1}` and `lag`
/// lagged differences, using rows `start..` of the differenced series.
fn adf_design(y: &[f64], lag: usize, start: usize, det: Deterministic) -> WlsDesign {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let n = dy.len() as f64;
    let mut names = vec!["const".to_string()];
    if det == Deterministic::ConstantTrend {
        names.push("trend".into());
    }
    names.push("y_lag".into());
    names.extend((1..=lag).map(|i| format!("dy_lag{i}")));
    let rows: Vec<Vec<f64>> = (start..dy.len())
        .map(|t| {
            let mut r = vec![1.0];
            if det == Deterministic::ConstantTrend {
                r.push((t + 1) as f64 / n);
            }
            r.push(y[t]);
            r.extend((1..=lag).map(|i| dy[t - i]));
            r
        })
        .collect();
    WlsDesign {
        names,
        y: dy[start..].to_vec(),
        weights: vec![1.0; rows.len()],
        x: rows,
    }
}

/// OLS t-ratio of `y_lag` plus the AIC of the fit.
fn adf_fit(d: &WlsDesign) -> Result<(f64, f64)> {
    let fit = d.fit()?;
    let n = fit.residuals.len();
    let k = fit.coef.len();
    let rss: f64 = fit.residuals.iter().map(|u| u * u).sum();
    if n <= k || rss <= 0.0 {
        return Err(Error::Numeric("ADF regression has no residual variation".into()));
    }
    let s2 = rss / (n - k) as f64;
    let j = fit.names.iter().position(|n| n == "y_lag").expect("y_lag is always present");
    let t = fit.coef[j] / (s2 * fit.gram_inv[(j, j)]).sqrt();
    let aic = n as f64 * (rss / n as f64).ln() + 2.0 * k as f64;
    Ok((t, aic))
}

pub fn adf_test(series: &[f64], lag: LagChoice, det: Deterministic) -> Result<AdfResult> {
    let n = series.len();
    let max_lag = match lag {
        LagChoice::Fixed(l) => l,
        LagChoice::Aic => schwert_bound(n).min((n / 2).saturating_sub(det.n_terms() + 2)),
    };
    if n < max_lag + 10 {
        return Err(Error::Validation(format!(
            "ADF needs at least {} observations for lag {max_lag}, got {n}",
            max_lag + 10
        )));
    }
    if is_constant(series) {
        return Err(Error::Validation("ADF test on a constant series".into()));
    }
    let chosen = match lag {
        LagChoice::Fixed(l) => l,
        LagChoice::Aic => {
            let mut best = (0, f64::INFINITY);
            for l in 0..=max_lag {
                let (_, aic) = adf_fit(&adf_design(series, l, max_lag, det))?;
                if aic < best.1 {
                    best = (l, aic);
                }
            }
            best.0
        }
    };
    let (statistic, _) = adf_fit(&adf_design(series, chosen, chosen, det))?;
    Ok(AdfResult {
        statistic,
        p_value: adf_p_value(statistic, det),
        lag: chosen,
        deterministic: det,
    })
}

const KPSS_LEVELS: [f64; 4] = [0.10, 0.05, 0.025, 0.01];
const KPSS_CRIT_LEVEL: [f64; 4] = [0.347, 0.463, 0.574, 0.739];
const KPSS_CRIT_TREND: [f64; 4] = [0.119, 0.146, 0.176, 0.216];

pub fn kpss_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

pub fn kpss_test(series: &[f64], det: Deterministic) -> Result<KpssResult> {
    let n = series.len();
    if n < 20 {
        return Err(Error::Validation(format!("KPSS needs at least 20 observations, got {n}")));
    }
    let resid = match det {
        Deterministic::Constant => {
            let m = series.iter().sum::<f64>() / n as f64;
            series.iter().map(|v| v - m).collect::<Vec<_>>()
        }
        Deterministic::ConstantTrend => {
            let d = WlsDesign {
                names: vec!["const".into(), "trend".into()],
                y: series.to_vec(),
                x: (0..n).map(|t| vec![1.0, (t + 1) as f64 / n as f64]).collect(),
                weights: vec![1.0; n],
            };
            d.fit()?.residuals
        }
    };
    let bandwidth = kpss_bandwidth(n);
    let nf = n as f64;
    let gamma = |l: usize| (l..n).map(|t| resid[t] * resid[t - l]).sum::<f64>() / nf;
    let lrv = gamma(0)
        + 2.0
            * (1..=bandwidth)
                .map(|l| (1.0 - l as f64 / (bandwidth as f64 + 1.0)) * gamma(l))
                .sum::<f64>();
    if !(lrv > 0.0) {
        return Err(Error::Validation("KPSS test on a series without variation".into()));
    }
    let mut s = 0.0;
    let eta = resid
        .iter()
        .map(|e| {
            s += e;
            s * s
        })
        .sum::<f64>()
        / (nf * nf * lrv);
    let crit = match det {
        Deterministic::Constant => &KPSS_CRIT_LEVEL,
        Deterministic::ConstantTrend => &KPSS_CRIT_TREND,
    };
    let (p_value, censoring) = kpss_p(eta, crit);
    Ok(KpssResult {
        statistic: eta,
        p_value,
        censoring,
        bandwidth,
        deterministic: det,
    })
}

fn kpss_p(eta: f64, crit: &[f64; 4]) -> (f64, Censoring) {
    if eta <= crit[0] {
        return (KPSS_LEVELS[0], Censoring::AtLeast);
    }
    if eta >= crit[3] {
        return (KPSS_LEVELS[3], Censoring::AtMost);
    }
    let i = (0..3).find(|&i| eta <= crit[i + 1]).unwrap_or(2);
    let f = (eta - crit[i]) / (crit[i + 1] - crit[i]);
    (KPSS_LEVELS[i] + f * (KPSS_LEVELS[i + 1] - KPSS_LEVELS[i]), Censoring::None)
}

/// Durbin-Watson statistic with a two-sided normal-approximation p-value.
pub fn dw_test(residuals: &[f64]) -> Result<DwResult> {
    let n = residuals.len();
    if n < 10 {
        return Err(Error::Validation(format!("Durbin-Watson needs at least 10 residuals, got {n}")));
    }
    let ss: f64 = residuals.iter().map(|u| u * u).sum();
    if !(ss > 0.0) {
        return Err(Error::Validation("Durbin-Watson on all-zero residuals".into()));
    }
    let statistic = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / ss;
    let z = (statistic - 2.0) / (4.0 / n as f64).sqrt();
    Ok(DwResult {
        statistic,
        p_value: two_sided_normal_p(z),
    })
}

/// Diagnostics for the T-DiD fit behind an estimate: ADF and KPSS on the gap
/// the estimator works with (differenced, or quasi-differenced with the
/// fitted persistence), and Durbin-Watson on the regression residuals in
/// periods that carry weight.
pub fn tdid_diagnostics(
    panel: &Panel,
    control: usize,
    transform: TransformKind,
    settings: &EstimationSettings,
    adf_lag: LagChoice,
    det: Deterministic,
) -> Result<DiagnosticsReport> {
    crate::pipeline::check_combination(EstimatorKind::Tdid, transform)?;
    let EstimationSettings { wpost, wpre, .. } = settings;
    let (series, fit) = match transform {
        TransformKind::None | TransformKind::FirstDifference => {
            let p = if transform == TransformKind::None {
                panel.clone()
            } else {
                first_difference(panel)?
            };
            let x = p.gap(control)?;
            let rw = RegimeWeights::new(&p, wpost, wpre)?;
            let fit = tdid_wls_design(&x, &p.regimes(), &rw).fit()?;
            (x, fit)
        }
        TransformKind::Ar1Augment => {
            let x = panel.gap(control)?;
            let fit = ar1_augment_design(panel, control, wpost, wpre)?.0.fit()?;
            let rho = fit.coefficient("x_lag1").unwrap_or(0.0);
            (x.windows(2).map(|w| w[1] - rho * w[0]).collect(), fit)
        }
        TransformKind::Detrend => {
            let fit = detrend_design(panel, control, wpost, wpre)?.design.fit()?;
            (panel.gap(control)?, fit)
        }
    };
    let resid: Vec<f64> = fit
        .residuals
        .iter()
        .zip(&fit.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(u, _)| *u)
        .collect();
    Ok(DiagnosticsReport {
        adf: adf_test(&series, adf_lag, det)?,
        kpss: kpss_test(&series, det)?,
        dw: dw_test(&resid)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn p_value_surface_is_continuous_and_monotone() {
        for det in [Deterministic::Constant, Deterministic::ConstantTrend] {
            let s = match det {
                Deterministic::Constant => &SURFACE_C,
                Deterministic::ConstantTrend => &SURFACE_CT,
            };
            let below = adf_p_value(s.tau_star - 1e-9, det);
            let above = adf_p_value(s.tau_star + 1e-9, det);
            assert!((below - above).abs() < 2e-3);
            let mut prev = 0.0;
            for i in 0..200 {
                let p = adf_p_value(-8.0 + i as f64 * 0.05, det);
                assert!(p >= prev - 1e-12);
                prev = p;
            }
        }
        // textbook 5% critical values
        assert!((adf_p_value(-2.86, Deterministic::Constant) - 0.05).abs() < 0.003);
        assert!((adf_p_value(-3.41, Deterministic::ConstantTrend) - 0.05).abs() < 0.003);
    }

    #[test]
    fn kpss_interpolation() {
        assert_eq!(kpss_p(0.05, &KPSS_CRIT_TREND), (0.10, Censoring::AtLeast));
        assert_eq!(kpss_p(0.5, &KPSS_CRIT_TREND), (0.01, Censoring::AtMost));
        let (p, c) = kpss_p(0.146, &KPSS_CRIT_TREND);
        assert!((p - 0.05).abs() < 1e-12 && c == Censoring::None);
        let (p, _) = kpss_p(0.1325, &KPSS_CRIT_TREND);
        assert!((p - 0.075).abs() < 1e-12);
    }

    #[test]
    fn alternating_residuals_give_dw_near_four() {
        let r: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let dw = dw_test(&r).unwrap();
        assert!((dw.statistic - 4.0 * 99.0 / 100.0).abs() < 1e-12);
        assert!(dw.p_value < 1e-6);
    }

    #[test]
    fn input_checks() {
        assert!(dw_test(&[1.0; 5]).is_err());
        assert!(kpss_test(&[1.0; 10], Deterministic::Constant).is_err());
        assert!(adf_test(&[2.0; 100], LagChoice::Aic, Deterministic::Constant).is_err());
        assert!(adf_test(&noise(12, 1), LagChoice::Fixed(5), Deterministic::Constant).is_err());
    }

    #[test]
    fn affine_invariance() {
        let x = noise(300, 3);
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v + 7.0).collect();
        for det in [Deterministic::Constant, Deterministic::ConstantTrend] {
            let (a, b) = (adf_test(&x, LagChoice::Aic, det).unwrap(), adf_test(&y, LagChoice::Aic, det).unwrap());
            assert!((a.statistic - b.statistic).abs() < 1e-10 && a.lag == b.lag);
            let (a, b) = (kpss_test(&x, det).unwrap(), kpss_test(&y, det).unwrap());
            assert!((a.statistic - b.statistic).abs() < 1e-10);
        }
        let z: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert!((dw_test(&x).unwrap().statistic - dw_test(&z).unwrap().statistic).abs() < 1e-10);
    }
}
