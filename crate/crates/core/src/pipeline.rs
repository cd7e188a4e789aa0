//! One entry point for every estimator / transform pair, always with HAC
//! inference attached.

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_ba, estimate_sc, estimate_tdid, sc_regime_weights, AttEstimate, EstimatorKind, TransformKind,
};
use crate::inference::{attach_inference, HacSpec};
use crate::panel::{Panel, Unit};
use crate::transforms::{
    estimate_ar1_augmented, estimate_ba_ar1, estimate_detrended_series, estimate_sc_ar1, first_difference,
};
use crate::weights::{RegimeWeights, WeightingScheme};

/// Weighting and HAC settings shared by every estimator in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSettings {
    pub wpost: WeightingScheme,
    pub wpre: WeightingScheme,
    pub hac: HacSpec,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        EstimationSettings {
            wpost: WeightingScheme::Uniform,
            wpre: WeightingScheme::Uniform,
            hac: HacSpec::auto(),
        }
    }
}

/// Checks that `transform` is defined for `estimator`.
pub fn check_combination(estimator: EstimatorKind, transform: TransformKind) -> Result<()> {
    if estimator == EstimatorKind::Sc && transform == TransformKind::Detrend {
        return Err(Error::Parameter(
            "the trend transform needs pre-period data and is not defined for sc".into(),
        ));
    }
    Ok(())
}

/// Estimate of `estimator` against control `control` after `transform`.
pub fn estimate(
    panel: &Panel,
    control: usize,
    estimator: EstimatorKind,
    transform: TransformKind,
    settings: &EstimationSettings,
) -> Result<AttEstimate> {
    check_combination(estimator, transform)?;
    let EstimationSettings { wpost, wpre, hac } = settings;
    let regimes = panel.regimes();
    match transform {
        TransformKind::None => plain(panel, control, estimator, settings),
        TransformKind::FirstDifference => {
            let mut est = plain(&first_difference(panel)?, control, estimator, settings)?;
            est.transform = TransformKind::FirstDifference;
            Ok(est)
        }
        TransformKind::Ar1Augment => match estimator {
            EstimatorKind::Tdid => estimate_ar1_augmented(panel, control, wpost, wpre, Some(hac)),
            EstimatorKind::Sc => estimate_sc_ar1(&panel.gap(control)?, &regimes, wpost, Some(hac)),
            EstimatorKind::Ba => estimate_ba_ar1(&panel.treated().values, &regimes, wpost, wpre, Some(hac)),
        },
        TransformKind::Detrend => {
            let series = match estimator {
                EstimatorKind::Ba => panel.treated().values.clone(),
                _ => panel.gap(control)?,
            };
            estimate_detrended_series(&series, &regimes, estimator, wpost, wpre)
        }
    }
}

fn plain(panel: &Panel, control: usize, estimator: EstimatorKind, settings: &EstimationSettings) -> Result<AttEstimate> {
    let EstimationSettings { wpost, wpre, hac } = settings;
    let regimes = panel.regimes();
    match estimator {
        EstimatorKind::Tdid => {
            let est = estimate_tdid(panel, control, wpost, wpre)?;
            let rw = RegimeWeights::new(panel, wpost, wpre)?;
            attach_inference(est, &panel.gap(control)?, &rw, &regimes, hac)
        }
        EstimatorKind::Sc => {
            let est = estimate_sc(panel, control, wpost)?;
            let rw = sc_regime_weights(panel, wpost)?;
            attach_inference(est, &panel.gap(control)?, &rw, &regimes, hac)
        }
        EstimatorKind::Ba => {
            let est = estimate_ba(panel, Unit::Treated, wpost, wpre)?;
            let rw = RegimeWeights::new(panel, wpost, wpre)?;
            attach_inference(est, &panel.treated().values, &rw, &regimes, hac)
        }
    }
}
