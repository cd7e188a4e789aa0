//! Pre-estimation transforms: first differences for unit roots, lagged-gap
//! augmentation for persistence and a linear trend regressor, together with
//! the limiting design and score matrices of the trend regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_from_fit, AttEstimate, Coefficient, EstimatorKind, TransformKind};
use crate::inference::{attach_variance, regression_inference, HacSpec};
use crate::linalg::{inverse, symmetric_eigenvalues_3x3, Matrix};
use crate::panel::{Panel, Regime, Series};
use crate::regression::WlsDesign;
use crate::weights::{RegimeWeights, WeightingScheme};

/// Smallest and largest admissible post-period share for the trend case.
pub const LAMBDA_MIN: f64 = 1e-6;
pub const LAMBDA_MAX: f64 = 1.0 - 1e-6;

/// First differences of every series.
///
/// The first pre-period is lost. The difference that straddles the end of
/// the pre-period mixes two regimes and is moved into the transition window,
/// where it carries no weight; with no window this creates a one-period
/// window and shortens the post-period by one.
pub fn first_difference(panel: &Panel) -> Result<Panel> {
    let (n_pre, k, n_post) = (panel.n_pre(), panel.n_transition(), panel.n_post());
    let (new_pre, new_k, new_post) = if k == 0 {
        (n_pre - 1, 1, n_post - 1)
    } else {
        (n_pre - 1, k, n_post)
    };
    if new_pre < 2 || new_post < 2 {
        return Err(Error::Validation(format!(
            "series too short to difference: {n_pre} pre and {n_post} post periods"
        )));
    }
    let diff = |s: &Series| Series::new(s.label.clone(), s.values.windows(2).map(|w| w[1] - w[0]).collect());
    Panel::with_periods(
        diff(panel.treated()),
        panel.controls().iter().map(diff).collect(),
        panel.periods()[1..].to_vec(),
        new_pre,
        new_k,
        new_post,
    )
}

/// Regression of `s_t` on `[1, 1{t >= 1}, s_{t-1}]`.
///
/// Row `i` pairs `s[i + 1]` with `s[i]`; the first stored period has no lag
/// and is dropped, so the pre-period weights are realized over `n_pre - 1`
/// periods.
pub fn ar1_design_for_series(
    series: &[f64],
    regimes: &[Regime],
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<(WlsDesign, RegimeWeights)> {
    let n_pre = regimes.iter().filter(|r| **r == Regime::Pre).count();
    let k = regimes.iter().filter(|r| **r == Regime::Transition).count();
    let n_post = regimes.len() - n_pre - k;
    if n_pre < 3 {
        return Err(Error::Validation(format!(
            "lag augmentation needs at least 3 pre-periods, got {n_pre}"
        )));
    }
    let rw = RegimeWeights::for_partition(n_pre - 1, k, n_post, wpost, wpre)?;
    let design = WlsDesign {
        names: vec!["intercept".into(), "att".into(), "x_lag1".into()],
        y: series[1..].to_vec(),
        x: (1..series.len())
            .map(|i| {
                let post = if regimes[i] == Regime::Post { 1.0 } else { 0.0 };
                vec![1.0, post, series[i - 1]]
            })
            .collect(),
        weights: rw.regression_weights(),
    };
    Ok((design, rw))
}

pub fn ar1_augment_design(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<(WlsDesign, RegimeWeights)> {
    ar1_design_for_series(&panel.gap(control)?, &panel.regimes(), wpost, wpre)
}

/// T-DiD with the lagged gap as an extra regressor. The reported ATT is the
/// coefficient on the post indicator; `x_lag1` is the persistence
/// coefficient.
pub fn estimate_ar1_augmented(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: Option<&HacSpec>,
) -> Result<AttEstimate> {
    let (design, _) = ar1_augment_design(panel, control, wpost, wpre)?;
    fit_ar1(&design, EstimatorKind::Tdid, panel.n_pre() - 1, panel.n_post(), hac)
}

fn fit_ar1(
    design: &WlsDesign,
    estimator: EstimatorKind,
    n_pre: usize,
    n_post: usize,
    hac: Option<&HacSpec>,
) -> Result<AttEstimate> {
    let fit = design.fit()?;
    let est = estimate_from_fit(&fit, "att", estimator, TransformKind::Ar1Augment, n_pre, n_post);
    match hac {
        Some(spec) => regression_inference(est, &fit, "att", spec),
        None => Ok(est),
    }
}

/// Before-after with the unit's own lag as a regressor.
pub fn estimate_ba_ar1(
    series: &[f64],
    regimes: &[Regime],
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: Option<&HacSpec>,
) -> Result<AttEstimate> {
    let (design, rw) = ar1_design_for_series(series, regimes, wpost, wpre)?;
    fit_ar1(&design, EstimatorKind::Ba, rw.wpre.len(), rw.wpost.len(), hac)
}

/// SC with the lagged gap: post-period regression of `X_t` on
/// `[1, X_{t-1}]`; the intercept is the ATT.
pub fn estimate_sc_ar1(
    gap: &[f64],
    regimes: &[Regime],
    wpost: &WeightingScheme,
    hac: Option<&HacSpec>,
) -> Result<AttEstimate> {
    let n_post = regimes.iter().filter(|r| **r == Regime::Post).count();
    let w = wpost.realize(n_post)?;
    let mut weights = vec![0.0; gap.len() - 1];
    let first_post = regimes.iter().position(|r| *r == Regime::Post).unwrap_or(gap.len());
    for (j, wt) in w.iter().enumerate() {
        weights[first_post + j - 1] = *wt;
    }
    let design = WlsDesign {
        names: vec!["att".into(), "x_lag1".into()],
        y: gap[1..].to_vec(),
        x: (1..gap.len()).map(|i| vec![1.0, gap[i - 1]]).collect(),
        weights,
    };
    let fit = design.fit()?;
    let est = estimate_from_fit(&fit, "att", EstimatorKind::Sc, TransformKind::Ar1Augment, 0, n_post);
    match hac {
        Some(spec) => regression_inference(est, &fit, "att", spec),
        None => Ok(est),
    }
}

/// Design matrix of the trend regression `[1, 1{t>=1}, t~/n]` under uniform
/// regime weights, plus the limiting matrices at `lambda = T/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetrendDesign {
    pub design: WlsDesign,
    /// Effective sample size `n_pre + n_post`.
    pub n: usize,
    pub lambda: f64,
}

/// Trend regressor `t~ = index + 1` (one at the first stored period) scaled
/// by `n = n_pre + n_post`.
pub fn detrend_design_for_series(
    series: &[f64],
    regimes: &[Regime],
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<DetrendDesign> {
    if !wpost.is_uniform() || !wpre.is_uniform() {
        return Err(Error::Parameter(
            "the trend transform is only defined for uniform pre and post weights".into(),
        ));
    }
    let n_pre = regimes.iter().filter(|r| **r == Regime::Pre).count();
    let k = regimes.iter().filter(|r| **r == Regime::Transition).count();
    let n_post = regimes.len() - n_pre - k;
    let n = n_pre + n_post;
    let lambda = n_post as f64 / n as f64;
    check_lambda(lambda)?;
    let rw = RegimeWeights::for_partition(n_pre, k, n_post, wpost, wpre)?;
    let nf = n as f64;
    let design = WlsDesign {
        names: vec!["intercept".into(), "att".into(), "trend".into()],
        y: series.to_vec(),
        x: regimes
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let post = if *r == Regime::Post { 1.0 } else { 0.0 };
                vec![1.0, post, (i + 1) as f64 / nf]
            })
            .collect(),
        weights: rw.regression_weights(),
    };
    Ok(DetrendDesign { design, n, lambda })
}

pub fn detrend_design(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<DetrendDesign> {
    detrend_design_for_series(&panel.gap(control)?, &panel.regimes(), wpost, wpre)
}

/// Fits the trend regression and attaches the standard errors implied by the
/// limiting sandwich, `sqrt(e_j' Q e_j / n)`, with the noise variance taken
/// as the average of the pre and post mean squared residuals.
pub fn estimate_detrended_series(
    series: &[f64],
    regimes: &[Regime],
    estimator: EstimatorKind,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<AttEstimate> {
    let dd = detrend_design_for_series(series, regimes, wpost, wpre)?;
    let fit = dd.design.fit()?;
    let sigma2 = 0.5
        * fit
            .weights
            .iter()
            .zip(&fit.residuals)
            .map(|(w, u)| w * u * u)
            .sum::<f64>();
    let tm = TrendMatrices::exact(dd.lambda, sigma2)?;
    let nf = dd.n as f64;
    let n_post = (dd.lambda * nf).round() as usize;
    let mut est = AttEstimate::new(fit.coef[1], estimator, dd.n - n_post, n_post);
    est.transform = TransformKind::Detrend;
    est.aux = vec![
        Coefficient {
            name: "intercept".into(),
            value: fit.coef[0],
            se: Some((tm.q[(0, 0)] / nf).sqrt()),
        },
        Coefficient {
            name: "trend".into(),
            value: fit.coef[2] / nf,
            se: Some((tm.q[(2, 2)] / nf).sqrt() / nf),
        },
    ];
    attach_variance(est, tm.q[(1, 1)] / nf, 0)
}

pub fn estimate_detrended(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<AttEstimate> {
    estimate_detrended_series(&panel.gap(control)?, &panel.regimes(), EstimatorKind::Tdid, wpost, wpre)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
        return Err(Error::Parameter(format!(
            "post-period share {lambda} outside [{LAMBDA_MIN}, {LAMBDA_MAX}]"
        )));
    }
    Ok(())
}

/// Limit of the scaled weighted Gram matrix of the trend regression.
pub fn q_a(lambda: f64) -> Matrix {
    let l = lambda;
    let a13 = (3.0 - 2.0 * l) / 2.0;
    let a23 = (2.0 - l) / 2.0;
    let a33 = (2.0 * l * l - 5.0 * l + 4.0) / 3.0;
    Matrix::from_rows(&[vec![2.0, 1.0, a13], vec![1.0, 1.0, a23], vec![a13, a23, a33]])
}

fn q_b_with_corner(lambda: f64, sigma2: f64, b33: f64) -> Matrix {
    let l = lambda;
    let b = [
        vec![1.0 / (l * (1.0 - l)), 1.0 / l, 1.0 / l],
        vec![1.0 / l, 1.0 / l, (2.0 - l) / (2.0 * l)],
        vec![1.0 / l, (2.0 - l) / (2.0 * l), b33],
    ];
    Matrix::from_rows(&b).scale(sigma2)
}

/// Score-variance matrix with `(2/lambda)(3 - 2 lambda)` in the trend cell.
pub fn q_b(lambda: f64, sigma2: f64) -> Matrix {
    q_b_with_corner(lambda, sigma2, 2.0 / lambda * (3.0 - 2.0 * lambda))
}

/// Exact limit of `n * sum_t w_t^2 x_t x_t'` for i.i.d. noise under uniform
/// regime weights. Differs from [`q_b`] only in the trend cell, which is
/// `(1 - lambda)/3 + (1 - (1 - lambda)^3) / (3 lambda^2)`.
pub fn q_b_exact(lambda: f64, sigma2: f64) -> Matrix {
    let l = lambda;
    let b33 = (1.0 - l) / 3.0 + (1.0 - (1.0 - l).powi(3)) / (3.0 * l * l);
    q_b_with_corner(lambda, sigma2, b33)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendMatrices {
    pub lambda: f64,
    pub qa: Matrix,
    pub qb: Matrix,
    /// `qa^-1 qb qa^-1`.
    pub q: Matrix,
}

impl TrendMatrices {
    /// Matrices built from [`q_a`] and [`q_b`].
    pub fn new(lambda: f64, sigma2: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Self::assemble(lambda, q_a(lambda), q_b(lambda, sigma2))
    }

    /// Matrices built from [`q_a`] and [`q_b_exact`]; used for standard errors.
    pub fn exact(lambda: f64, sigma2: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Self::assemble(lambda, q_a(lambda), q_b_exact(lambda, sigma2))
    }

    fn assemble(lambda: f64, qa: Matrix, qb: Matrix) -> Result<Self> {
        let inv = inverse(&qa)?;
        let q = inv.matmul(&qb).matmul(&inv).symmetrized();
        Ok(TrendMatrices { lambda, qa, qb, q })
    }

    /// Asymptotic variance of `sqrt(n) (B_hat - B)`.
    pub fn att_variance(&self) -> f64 {
        self.q[(1, 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenScanRow {
    pub lambda: f64,
    pub mineig_qa: f64,
    pub mineig_qb: f64,
    pub mineig_q: f64,
}

/// Evenly spaced grid of `points` values over `[LAMBDA_MIN, LAMBDA_MAX]`.
pub fn lambda_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..points)
            .map(|i| LAMBDA_MIN + (LAMBDA_MAX - LAMBDA_MIN) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Minimum eigenvalues of `Q_A`, `Q_B` (unit noise variance) and `Q` along a
/// grid of post-period shares.
pub fn trend_matrices_min_eig_scan(grid: &[f64]) -> Result<Vec<EigenScanRow>> {
    if grid.is_empty() {
        return Err(Error::Parameter("eigenvalue scan needs a non-empty grid".into()));
    }
    grid.iter()
        .map(|&lambda| {
            let tm = TrendMatrices::new(lambda, 1.0)?;
            Ok(EigenScanRow {
                lambda,
                mineig_qa: symmetric_eigenvalues_3x3(&tm.qa)[0],
                mineig_qb: symmetric_eigenvalues_3x3(&tm.qb)[0],
                mineig_q: symmetric_eigenvalues_3x3(&tm.q)[0],
            })
        })
        .collect()
}
