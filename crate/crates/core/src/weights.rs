//! Convex weighting schemes over a pre- or post-treatment horizon and the
//! signed full-horizon weights they induce.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;

/// Default bound on `H * max_t w_H(t)` for a realized scheme.
pub const DEFAULT_MAX_WEIGHT_BOUND: f64 = 8.0;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightingScheme {
    Uniform,
    /// `w_H(t) ∝ H - 2at`, `a ∈ [0, 0.5)`; more weight near the treatment date.
    LinearDecay { a: f64 },
    /// Raw non-negative weights, renormalized to sum to one. Element `k`
    /// applies to the `k+1`-th period away from the treatment date.
    Custom { weights: Vec<f64> },
}

/// Weights over a horizon plus any non-fatal notes raised while realizing them.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedWeights {
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

impl WeightingScheme {
    pub fn is_uniform(&self) -> bool {
        match self {
            WeightingScheme::Uniform => true,
            WeightingScheme::LinearDecay { a } => *a == 0.0,
            WeightingScheme::Custom { .. } => false,
        }
    }

    /// Realized weights with the default membership bound; warnings are dropped.
    pub fn realize(&self, horizon: usize) -> Result<Vec<f64>> {
        self.realize_checked(horizon, DEFAULT_MAX_WEIGHT_BOUND)
            .map(|r| r.weights)
    }

    pub fn realize_checked(&self, horizon: usize, max_weight_bound: f64) -> Result<RealizedWeights> {
        if horizon == 0 {
            return Err(Error::Parameter("weighting horizon must be positive".into()));
        }
        let mut warnings = Vec::new();
        let weights = match self {
            WeightingScheme::Uniform => vec![1.0 / horizon as f64; horizon],
            WeightingScheme::LinearDecay { a } => {
                if !(0.0..0.5).contains(a) {
                    return Err(Error::Parameter(format!(
                        "linear-decay parameter must lie in [0, 0.5), got {a}"
                    )));
                }
                let h = horizon as f64;
                let raw: Vec<f64> = (1..=horizon).map(|t| h - 2.0 * a * t as f64).collect();
                normalize(&raw)
            }
            WeightingScheme::Custom { weights } => {
                if weights.len() != horizon {
                    return Err(Error::Validation(format!(
                        "custom weights have length {}, horizon is {horizon}",
                        weights.len()
                    )));
                }
                if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
                    return Err(Error::Validation(format!(
                        "custom weights must be finite and non-negative, found {w}"
                    )));
                }
                let sum: f64 = weights.iter().sum();
                if sum <= 0.0 {
                    return Err(Error::Validation("custom weights sum to zero".into()));
                }
                if (sum - 1.0).abs() > SUM_TOL {
                    warnings.push(format!("custom weights summed to {sum}; renormalized"));
                }
                normalize(weights)
            }
        };
        let max = weights.iter().cloned().fold(0.0, f64::max);
        let spread = horizon as f64 * max;
        if spread > max_weight_bound {
            return Err(Error::Validation(format!(
                "weights too concentrated: horizon * max weight = {spread:.3} exceeds {max_weight_bound}"
            )));
        }
        Ok(RealizedWeights { weights, warnings })
    }
}

fn normalize(raw: &[f64]) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

/// Realizes `scheme` over `horizon` periods.
pub fn realize_weights(scheme: &WeightingScheme, horizon: usize) -> Result<Vec<f64>> {
    scheme.realize(horizon)
}

impl fmt::Display for WeightingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightingScheme::Uniform => write!(f, "uniform"),
            WeightingScheme::LinearDecay { a } => write!(f, "linear:{a}"),
            WeightingScheme::Custom { weights } => {
                let parts: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                write!(f, "custom:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for WeightingScheme {
    type Err = Error;

    /// Accepts `uniform`, `linear:<a>` and `custom:<w1>,<w2>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(WeightingScheme::Uniform);
        }
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("cannot parse weight value '{v}'")))
        };
        if let Some(rest) = s.strip_prefix("linear:") {
            return Ok(WeightingScheme::LinearDecay { a: parse(rest)? });
        }
        if let Some(rest) = s.strip_prefix("custom:") {
            let weights = rest.split(',').map(parse).collect::<Result<Vec<_>>>()?;
            return Ok(WeightingScheme::Custom { weights });
        }
        Err(Error::Parameter(format!("unknown weighting scheme '{s}'")))
    }
}

/// Signed weights over the whole stored horizon.
///
/// `omega[i]` is `+wpost` in the post block, `-wpre` in the pre block and zero
/// in the transition window. `wpre[k]` applies to the period `k + 1` steps
/// before the window.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeWeights {
    pub omega: Vec<f64>,
    pub wpost: Vec<f64>,
    pub wpre: Vec<f64>,
}

impl RegimeWeights {
    pub fn new(panel: &Panel, wpost: &WeightingScheme, wpre: &WeightingScheme) -> Result<Self> {
        Self::for_partition(
            panel.n_pre(),
            panel.n_transition(),
            panel.n_post(),
            wpost,
            wpre,
        )
    }

    pub fn for_partition(
        n_pre: usize,
        n_transition: usize,
        n_post: usize,
        wpost: &WeightingScheme,
        wpre: &WeightingScheme,
    ) -> Result<Self> {
        let post = wpost.realize(n_post)?;
        let pre = wpre.realize(n_pre)?;
        Ok(Self::from_vectors(post, pre, n_transition))
    }

    pub fn from_vectors(wpost: Vec<f64>, wpre: Vec<f64>, n_transition: usize) -> Self {
        let n_pre = wpre.len();
        let mut omega = Vec::with_capacity(n_pre + n_transition + wpost.len());
        omega.extend((0..n_pre).map(|i| -wpre[n_pre - 1 - i]));
        omega.extend(std::iter::repeat_n(0.0, n_transition));
        omega.extend(wpost.iter().copied());
        RegimeWeights { omega, wpost, wpre }
    }

    /// Non-negative regression weights `|omega|`.
    pub fn regression_weights(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w.abs()).collect()
    }

    /// Pre-block weights in time order (earliest period first).
    pub fn pre_in_time_order(&self) -> Vec<f64> {
        self.wpre.iter().rev().copied().collect()
    }
}
