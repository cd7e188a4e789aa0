//! Point estimators: T-DiD (closed form and weighted regression), the
//! single-control synthetic control and the before-after comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, Regime, Unit};
use crate::regression::{WlsDesign, WlsFit};
use crate::weights::{RegimeWeights, WeightingScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Tdid,
    Sc,
    Ba,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Tdid => "tdid",
            EstimatorKind::Sc => "sc",
            EstimatorKind::Ba => "ba",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tdid" | "did" => Ok(EstimatorKind::Tdid),
            "sc" => Ok(EstimatorKind::Sc),
            "ba" => Ok(EstimatorKind::Ba),
            other => Err(Error::Parameter(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    #[default]
    None,
    FirstDifference,
    Ar1Augment,
    Detrend,
}

impl TransformKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransformKind::None => "none",
            TransformKind::FirstDifference => "first-difference",
            TransformKind::Ar1Augment => "ar1-augment",
            TransformKind::Detrend => "detrend",
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(TransformKind::None),
            "first-difference" | "fd" => Ok(TransformKind::FirstDifference),
            "ar1-augment" | "ar1" => Ok(TransformKind::Ar1Augment),
            "detrend" => Ok(TransformKind::Detrend),
            other => Err(Error::Parameter(format!("unknown transform '{other}'"))),
        }
    }
}

/// A nuisance coefficient reported next to the ATT (intercept, lag, trend).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub hac_se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// Bartlett truncation lag used.
    pub lag: usize,
    /// True when the long-run variance had to be truncated at zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttEstimate {
    pub point: f64,
    pub inference: Option<Inference>,
    pub estimator: EstimatorKind,
    pub transform: TransformKind,
    pub aux: Vec<Coefficient>,
    pub n_pre: usize,
    pub n_post: usize,
}

impl AttEstimate {
    pub fn new(point: f64, estimator: EstimatorKind, n_pre: usize, n_post: usize) -> Self {
        AttEstimate {
            point,
            inference: None,
            estimator,
            transform: TransformKind::None,
            aux: Vec::new(),
            n_pre,
            n_post,
        }
    }

    pub fn hac_se(&self) -> Option<f64> {
        self.inference.as_ref().map(|i| i.hac_se)
    }

    pub fn t_stat(&self) -> Option<f64> {
        self.inference.as_ref().map(|i| i.t_stat)
    }

    pub fn p_value(&self) -> Option<f64> {
        self.inference.as_ref().map(|i| i.p_value)
    }

    pub fn aux_value(&self, name: &str) -> Option<f64> {
        self.aux.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

/// `sum_t omega_t * s_t`.
pub fn weighted_contrast(series: &[f64], omega: &[f64]) -> f64 {
    series.iter().zip(omega).map(|(s, w)| s * w).sum()
}

pub fn estimate_tdid(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<AttEstimate> {
    let x = panel.gap(control)?;
    let rw = RegimeWeights::new(panel, wpost, wpre)?;
    Ok(AttEstimate::new(
        weighted_contrast(&x, &rw.omega),
        EstimatorKind::Tdid,
        panel.n_pre(),
        panel.n_post(),
    ))
}

/// Design for `X_t` on `[1, 1{t >= 1}]` with weights `|omega_t|`.
pub fn tdid_wls_design(x: &[f64], regimes: &[Regime], rw: &RegimeWeights) -> WlsDesign {
    WlsDesign {
        names: vec!["intercept".into(), "att".into()],
        y: x.to_vec(),
        x: regimes
            .iter()
            .map(|r| vec![1.0, if *r == Regime::Post { 1.0 } else { 0.0 }])
            .collect(),
        weights: rw.regression_weights(),
    }
}

pub fn tdid_wls_fit(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<WlsFit> {
    let x = panel.gap(control)?;
    let rw = RegimeWeights::new(panel, wpost, wpre)?;
    tdid_wls_design(&x, &panel.regimes(), &rw).fit()
}

pub fn estimate_tdid_wls(
    panel: &Panel,
    control: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<AttEstimate> {
    let fit = tdid_wls_fit(panel, control, wpost, wpre)?;
    Ok(estimate_from_fit(&fit, "att", EstimatorKind::Tdid, TransformKind::None, panel.n_pre(), panel.n_post()))
}

/// Wraps the coefficient `att_name` of a fit as an estimate; the other
/// coefficients become auxiliary entries (standard errors filled in later).
pub fn estimate_from_fit(
    fit: &WlsFit,
    att_name: &str,
    estimator: EstimatorKind,
    transform: TransformKind,
    n_pre: usize,
    n_post: usize,
) -> AttEstimate {
    let mut est = AttEstimate::new(fit.coefficient(att_name).unwrap_or(f64::NAN), estimator, n_pre, n_post);
    est.transform = transform;
    est.aux = fit
        .names
        .iter()
        .zip(&fit.coef)
        .filter(|(n, _)| n.as_str() != att_name)
        .map(|(n, v)| Coefficient {
            name: n.clone(),
            value: *v,
            se: None,
        })
        .collect();
    est
}

/// Signed weights of the SC estimator: post weights only.
pub fn sc_regime_weights(panel: &Panel, wpost: &WeightingScheme) -> Result<RegimeWeights> {
    let post = wpost.realize(panel.n_post())?;
    Ok(RegimeWeights::from_vectors(post, vec![0.0; panel.n_pre()], panel.n_transition()))
}

pub fn estimate_sc(panel: &Panel, control: usize, wpost: &WeightingScheme) -> Result<AttEstimate> {
    let x = panel.gap(control)?;
    let rw = sc_regime_weights(panel, wpost)?;
    Ok(AttEstimate::new(
        weighted_contrast(&x, &rw.omega),
        EstimatorKind::Sc,
        0,
        panel.n_post(),
    ))
}

pub fn estimate_ba(
    panel: &Panel,
    unit: Unit,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
) -> Result<AttEstimate> {
    let y = &panel.unit(unit)?.values;
    let rw = RegimeWeights::new(panel, wpost, wpre)?;
    Ok(AttEstimate::new(
        weighted_contrast(y, &rw.omega),
        EstimatorKind::Ba,
        panel.n_pre(),
        panel.n_post(),
    ))
}

/// SC with the pre-period level gap removed; algebraically the T-DiD with
/// uniform pre-treatment weights.
pub fn estimate_demeaned_sc(panel: &Panel, control: usize, wpost: &WeightingScheme) -> Result<AttEstimate> {
    let x = panel.gap(control)?;
    let pre_mean = x[..panel.n_pre()].iter().sum::<f64>() / panel.n_pre() as f64;
    let post = wpost.realize(panel.n_post())?;
    let start = panel.n_pre() + panel.n_transition();
    let point = x[start..].iter().zip(&post).map(|(v, w)| w * (v - pre_mean)).sum();
    Ok(AttEstimate::new(point, EstimatorKind::Sc, panel.n_pre(), panel.n_post()))
}
