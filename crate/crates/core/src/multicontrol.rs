//! Several controls for one treated unit: the vector of per-control T-DiD
//! estimates, its HAC covariance, the efficient minimum-distance combination
//! and the over-identifying restrictions test; plus the two-control and
//! pre-trends tests and the multiple-treated-unit path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{weighted_contrast, AttEstimate, EstimatorKind};
use crate::inference::{
    attach_inference, attach_variance, contrast_variance, long_run_covariance, regime_demeaned_weighted,
    HacSpec, TestRecord,
};
use crate::linalg::{equilibrated_condition, solve, Matrix};
use crate::panel::{Panel, Regime};
use crate::stats::chi2_sf;
use crate::weights::{RegimeWeights, WeightingScheme};

/// Covariances whose unit-diagonal condition number exceeds this are treated
/// as singular.
pub const COV_CONDITION_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct AttVector {
    pub estimates: Vec<f64>,
    /// Estimated covariance of `estimates`.
    pub cov: Matrix,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub point: f64,
    pub variance: f64,
    /// Minimum-distance weights; they sum to one and may be negative.
    pub weights: Vec<f64>,
}

impl Combination {
    pub fn se(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OveridResult {
    pub q_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub efficient: Combination,
    pub estimates: Vec<f64>,
}

impl AttVector {
    pub fn new(estimates: Vec<f64>, cov: Matrix, labels: Vec<String>) -> Result<Self> {
        let j = estimates.len();
        if cov.rows() != j || cov.cols() != j || labels.len() != j {
            return Err(Error::Validation(format!(
                "estimate vector of length {j} does not match covariance {}x{} or {} labels",
                cov.rows(),
                cov.cols(),
                labels.len()
            )));
        }
        if j == 0 {
            return Err(Error::Validation("empty estimate vector".into()));
        }
        if !cov.is_symmetric(1e-12 * cov_scale(&cov)) {
            return Err(Error::Validation("covariance matrix is not symmetric".into()));
        }
        Ok(AttVector { estimates, cov, labels })
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// Fails with a singularity error that names the most collinear pair.
    pub fn check_positive_definite(&self) -> Result<()> {
        let cond = equilibrated_condition(&self.cov);
        if cond.is_finite() && cond <= COV_CONDITION_LIMIT {
            return Ok(());
        }
        let j = self.len();
        let mut worst = (0, 0, -1.0);
        for a in 0..j {
            for b in (a + 1)..j {
                let d = (self.cov[(a, a)] * self.cov[(b, b)]).sqrt();
                let r = if d > 0.0 { (self.cov[(a, b)] / d).abs() } else { 1.0 };
                if r > worst.2 {
                    worst = (a, b, r);
                }
            }
        }
        let what = if j >= 2 {
            format!(
                "controls '{}' and '{}' are (nearly) collinear, |corr| = {:.6}",
                self.labels[worst.0], self.labels[worst.1], worst.2
            )
        } else {
            format!("control '{}' has zero variance", self.labels[0])
        };
        Err(Error::Singular(format!("condition number {cond:.3e}; {what}")))
    }
}

fn cov_scale(m: &Matrix) -> f64 {
    (0..m.rows()).map(|i| m[(i, i)].abs()).fold(1e-300, f64::max)
}

/// Per-control T-DiD estimates and their joint HAC covariance.
pub fn estimate_vector(
    panel: &Panel,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: &HacSpec,
) -> Result<AttVector> {
    if panel.n_controls() < 2 {
        return Err(Error::Validation(format!(
            "at least 2 controls required, panel has {}",
            panel.n_controls()
        )));
    }
    let rw = RegimeWeights::new(panel, wpost, wpre)?;
    let regimes = panel.regimes();
    let gaps = (0..panel.n_controls())
        .map(|j| panel.gap(j))
        .collect::<Result<Vec<_>>>()?;
    let labels = panel.controls().iter().map(|c| c.label.clone()).collect();
    vector_from_gaps(&gaps, &rw, &regimes, hac, labels)
}

/// Same as [`estimate_vector`] from precomputed gap series.
pub fn vector_from_gaps(
    gaps: &[Vec<f64>],
    rw: &RegimeWeights,
    regimes: &[Regime],
    hac: &HacSpec,
    labels: Vec<String>,
) -> Result<AttVector> {
    let n = regimes.len();
    let nf = n as f64;
    let estimates = gaps.iter().map(|x| weighted_contrast(x, &rw.omega)).collect();
    let z: Vec<Vec<f64>> = gaps
        .iter()
        .map(|x| {
            regime_demeaned_weighted(x, &rw.omega, regimes)
                .into_iter()
                .map(|v| nf * v)
                .collect()
        })
        .collect();
    let lag = hac.select_lag(&z);
    let cov = long_run_covariance(&z, lag)?.scale(1.0 / nf);
    let v = AttVector::new(estimates, cov, labels)?;
    v.check_positive_definite()?;
    Ok(v)
}

/// Inverse-covariance weighting `h* = S^-1 1 / (1' S^-1 1)`.
pub fn efficient_combine(v: &AttVector) -> Result<Combination> {
    v.check_positive_definite()?;
    let ones = vec![1.0; v.len()];
    let s_inv_1 = solve(&v.cov, &ones).map_err(|e| Error::Singular(e.to_string()))?;
    let denom: f64 = s_inv_1.iter().sum();
    if !(denom > 0.0) {
        return Err(Error::Singular("1' S^-1 1 is not positive".into()));
    }
    let mut weights: Vec<f64> = s_inv_1.iter().map(|x| x / denom).collect();
    make_sum_exact(&mut weights);
    let point = weights.iter().zip(&v.estimates).map(|(h, e)| h * e).sum();
    Ok(Combination {
        point,
        variance: 1.0 / denom,
        weights,
    })
}

/// Adjusts one weight by a rounding-sized amount so that the left-to-right
/// floating-point sum is exactly one. The last weight is first set to one
/// minus the sum of the others; failing that, each weight in turn is tried
/// the same way, with a short ulp search around it.
fn make_sum_exact(weights: &mut [f64]) {
    let n = weights.len();
    let prefix: f64 = weights[..n - 1].iter().sum();
    let mut starts = vec![(n - 1, 1.0 - prefix)];
    let residue = 1.0 - weights.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()));
    for j in order {
        let others: f64 = weights.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, w)| w).sum();
        starts.push((j, 1.0 - others));
        starts.push((j, weights[j] + residue));
    }
    for (j, start) in starts {
        let original = weights[j];
        let mut candidate = start;
        for _ in 0..16 {
            weights[j] = candidate;
            let total: f64 = weights.iter().sum();
            if total == 1.0 {
                return;
            }
            candidate = if total < 1.0 { candidate.next_up() } else { candidate.next_down() };
        }
        weights[j] = original;
    }
}

/// `Q = (e - 1 ATT*)' S^-1 (e - 1 ATT*)`, compared with chi-square(J - 1).
pub fn overid_test(v: &AttVector) -> Result<OveridResult> {
    if v.len() < 2 {
        return Err(Error::Validation("the over-identification test needs at least 2 controls".into()));
    }
    let efficient = efficient_combine(v)?;
    let dev: Vec<f64> = v.estimates.iter().map(|e| e - efficient.point).collect();
    let s_inv_dev = solve(&v.cov, &dev).map_err(|e| Error::Singular(e.to_string()))?;
    let q = dev.iter().zip(&s_inv_dev).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    let df = v.len() - 1;
    Ok(OveridResult {
        q_stat: q,
        df,
        p_value: chi2_sf(q, df),
        efficient,
        estimates: v.estimates.clone(),
    })
}

/// T-DiD between the two controls; the treated unit cancels and never
/// enters the computation.
pub fn two_control_difference_test(
    panel: &Panel,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: &HacSpec,
) -> Result<TestRecord> {
    if panel.n_controls() != 2 {
        return Err(Error::Validation(format!(
            "the two-control test needs exactly 2 controls, panel has {}",
            panel.n_controls()
        )));
    }
    let c1 = &panel.controls()[0].values;
    let c2 = &panel.controls()[1].values;
    let d: Vec<f64> = c1.iter().zip(c2).map(|(a, b)| a - b).collect();
    let rw = RegimeWeights::new(panel, wpost, wpre)?;
    contrast_test("id.tdid", &d, &rw, &panel.regimes(), hac)
}

/// Zero-null t-test of `sum_t omega_t s_t`. A series whose contrast and
/// variance are both exactly zero yields statistic 0 and p-value 1.
pub fn contrast_test(
    name: &str,
    series: &[f64],
    rw: &RegimeWeights,
    regimes: &[Regime],
    hac: &HacSpec,
) -> Result<TestRecord> {
    let point = weighted_contrast(series, &rw.omega);
    let var = contrast_variance(series, &rw.omega, regimes, hac)?;
    if var.value == 0.0 && point == 0.0 {
        return Ok(TestRecord::from_statistic(name, 0.0, 0.0, 0.0));
    }
    let se = var.value.sqrt();
    if !(se > 0.0) {
        return Err(Error::Inference {
            point,
            reason: "estimated variance is zero (degenerate series)".into(),
        });
    }
    Ok(TestRecord::from_statistic(name, point, se, point / se))
}

/// Default pseudo-post length: half the pre-period, rounded down.
pub fn default_split(n_pre: usize) -> usize {
    n_pre / 2
}

/// Pseudo-treatment test on pre-period data only: the last `split`
/// pre-periods act as the post-period and the rest as the pre-period.
pub fn pretrends_test_series(
    pre_series: &[f64],
    split: usize,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: &HacSpec,
) -> Result<TestRecord> {
    let n_pre = pre_series.len();
    if split < 2 || split + 2 > n_pre {
        return Err(Error::Parameter(format!(
            "pre-trends split {split} outside [2, {}]",
            n_pre.saturating_sub(2)
        )));
    }
    let rw = RegimeWeights::for_partition(n_pre - split, 0, split, wpost, wpre)?;
    let regimes: Vec<Regime> = (0..n_pre)
        .map(|i| if i < n_pre - split { Regime::Pre } else { Regime::Post })
        .collect();
    contrast_test("pretrends", pre_series, &rw, &regimes, hac)
}

pub fn pretrends_test(
    panel: &Panel,
    control: usize,
    split: Option<usize>,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: &HacSpec,
) -> Result<TestRecord> {
    let x = panel.gap(control)?;
    let split = split.unwrap_or_else(|| default_split(panel.n_pre()));
    pretrends_test_series(&x[..panel.n_pre()], split, wpost, wpre, hac)
}

/// Efficient T-DiD per treated unit. Panels with a single control fall back
/// to the plain estimate, returned without inference when its variance is
/// zero. Evaluated in parallel; output order follows input.
pub fn multi_treated_estimates(
    panels: &[Panel],
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: &HacSpec,
) -> Vec<Result<AttEstimate>> {
    panels
        .par_iter()
        .map(|p| single_treated_estimate(p, wpost, wpre, hac))
        .collect()
}

fn single_treated_estimate(
    panel: &Panel,
    wpost: &WeightingScheme,
    wpre: &WeightingScheme,
    hac: &HacSpec,
) -> Result<AttEstimate> {
    let rw = RegimeWeights::new(panel, wpost, wpre)?;
    if panel.n_controls() == 1 {
        let x = panel.gap(0)?;
        let est = AttEstimate::new(
            weighted_contrast(&x, &rw.omega),
            EstimatorKind::Tdid,
            panel.n_pre(),
            panel.n_post(),
        );
        // a noiseless panel still has a point estimate
        return match attach_inference(est.clone(), &x, &rw, &panel.regimes(), hac) {
            Err(Error::Inference { .. }) => Ok(est),
            other => other,
        };
    }
    let v = estimate_vector(panel, wpost, wpre, hac)?;
    let c = efficient_combine(&v)?;
    let est = AttEstimate::new(c.point, EstimatorKind::Tdid, panel.n_pre(), panel.n_post());
    attach_variance(est, c.variance, hac.lag(panel.len()))
}
