//! Replication harness: bias, precision and rejection rates of the
//! estimators and identification tests over simulated panels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{generate_with_rng, replication_rng, true_att, AttPath, DgpSpec};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, TransformKind};
use crate::inference::{t_test, HacSpec, TestRecord};
use crate::multicontrol::{contrast_test, default_split, pretrends_test_series, two_control_difference_test};
use crate::panel::{Panel, Regime, Series};
use crate::pipeline::{estimate, EstimationSettings};
use crate::stats::median;
use crate::weights::{RegimeWeights, WeightingScheme};

pub const SCHEMA_VERSION: u32 = 1;
pub const LEVELS: [f64; 3] = [0.01, 0.05, 0.10];
pub const DEFAULT_REPLICATIONS: usize = 2000;
/// Largest tolerated share of failed replications before a run aborts.
pub const MAX_FAILURE_SHARE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum McTest {
    #[serde(rename = "id.did")]
    IdDid,
    #[serde(rename = "id.sc")]
    IdSc,
    #[serde(rename = "id.ba")]
    IdBa,
    #[serde(rename = "pt.did")]
    PtDid,
    #[serde(rename = "pt.sc")]
    PtSc,
    #[serde(rename = "pt.ba")]
    PtBa,
}

impl McTest {
    pub const ALL: [McTest; 6] = [
        McTest::IdDid,
        McTest::IdSc,
        McTest::IdBa,
        McTest::PtDid,
        McTest::PtSc,
        McTest::PtBa,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            McTest::IdDid => "id.did",
            McTest::IdSc => "id.sc",
            McTest::IdBa => "id.ba",
            McTest::PtDid => "pt.did",
            McTest::PtSc => "pt.sc",
            McTest::PtBa => "pt.ba",
        }
    }
}

impl std::str::FromStr for McTest {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace("tdid", "did");
        McTest::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown test '{s}'")))
    }
}

/// What a power curve varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Constant ATT level.
    Att,
    /// Violation intensity `h` of the identification-test designs.
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: DgpSpec,
    /// Each entry `n` simulates `n` pre- and `n` post-periods.
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub tests: Vec<McTest>,
    /// Null for the estimator t-tests; `None` tests the true ATT.
    pub null_value: Option<f64>,
    pub wpost: WeightingScheme,
    pub wpre: WeightingScheme,
    pub hac: HacSpec,
    /// Forces one transform on every estimator; `None` picks it from the design.
    pub transform: Option<TransformKind>,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(dgp: DgpSpec) -> Self {
        McConfig {
            dgp,
            sample_sizes: vec![100],
            replications: DEFAULT_REPLICATIONS,
            seed: 20_240_601,
            estimators: vec![EstimatorKind::Tdid, EstimatorKind::Sc, EstimatorKind::Ba],
            tests: Vec::new(),
            null_value: None,
            wpost: WeightingScheme::Uniform,
            wpre: WeightingScheme::Uniform,
            hac: HacSpec::auto(),
            transform: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Parameter("replication count must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::Parameter("no sample sizes given".into()));
        }
        if let Some(n) = self.sample_sizes.iter().find(|n| **n < 4) {
            return Err(Error::Parameter(format!("sample sizes must be at least 4, got {n}")));
        }
        if self.estimators.is_empty() {
            return Err(Error::Parameter("estimator set is empty".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("thread count must be positive".into()));
        }
        for e in &self.estimators {
            crate::pipeline::check_combination(*e, self.transform_for(*e))?;
        }
        Ok(())
    }

    /// Transform applied to `estimator`: a unit root is differenced away,
    /// other persistence is handled with the lagged gap, and a treated-only
    /// linear trend is modelled for the estimators that see pre-period data.
    pub fn transform_for(&self, estimator: EstimatorKind) -> TransformKind {
        if let Some(t) = self.transform {
            return t;
        }
        let d = &self.dgp;
        if d.alpha2 == 1.0 {
            TransformKind::FirstDifference
        } else if d.alpha2 != 0.0 {
            TransformKind::Ar1Augment
        } else if d.alpha4 != 0.0 && estimator != EstimatorKind::Sc {
            TransformKind::Detrend
        } else {
            TransformKind::None
        }
    }

    fn settings(&self) -> EstimationSettings {
        EstimationSettings {
            wpost: self.wpost.clone(),
            wpre: self.wpre.clone(),
            hac: self.hac,
        }
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Rejection frequencies at the 1%, 5% and 10% levels with their binomial
/// standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejections {
    pub rej_1: f64,
    pub rej_5: f64,
    pub rej_10: f64,
    pub mcse_1: f64,
    pub mcse_5: f64,
    pub mcse_10: f64,
}

impl Rejections {
    fn from_p_values(p: &[f64]) -> Self {
        let n = p.len() as f64;
        let rate = |a: f64| p.iter().filter(|v| **v < a).count() as f64 / n;
        let se = |r: f64| (r * (1.0 - r) / n).sqrt();
        let (r1, r5, r10) = (rate(0.01), rate(0.05), rate(0.10));
        Rejections {
            rej_1: r1,
            rej_5: r5,
            rej_10: r10,
            mcse_1: se(r1),
            mcse_5: se(r5),
            mcse_10: se(r10),
        }
    }

    pub fn at(&self, level: f64) -> f64 {
        if level <= 0.01 {
            self.rej_1
        } else if level <= 0.05 {
            self.rej_5
        } else {
            self.rej_10
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub estimator: EstimatorKind,
    pub transform: TransformKind,
    pub sample_size: usize,
    /// Mean of the true ATT over replications (constant unless the path
    /// depends on the horizon).
    pub truth: f64,
    pub mb: f64,
    pub mad: f64,
    pub rmse: f64,
    #[serde(flatten)]
    pub rejections: Rejections,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub test: McTest,
    pub sample_size: usize,
    #[serde(flatten)]
    pub rejections: Rejections,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema_version: u32,
    pub design: String,
    pub seed: u64,
    pub replications: usize,
    pub estimators: Vec<EstimatorRow>,
    pub tests: Vec<TestRow>,
}

impl McReport {
    pub fn estimator_row(&self, estimator: EstimatorKind, sample_size: usize) -> Option<&EstimatorRow> {
        self.estimators
            .iter()
            .find(|r| r.estimator == estimator && r.sample_size == sample_size)
    }

    pub fn test_row(&self, test: McTest, sample_size: usize) -> Option<&TestRow> {
        self.tests.iter().find(|r| r.test == test && r.sample_size == sample_size)
    }
}

/// One replication's outcome for every estimator and test.
struct Draw {
    estimates: Vec<Result<(f64, f64)>>,
    tests: Vec<Result<f64>>,
}

fn run_replication(cfg: &McConfig, spec: &DgpSpec, n: usize, rep: usize, null: f64) -> Result<Draw> {
    let mut rng = replication_rng(cfg.seed, n as u64, rep as u64);
    let sim = generate_with_rng(spec, n, n, &mut rng)?;
    let settings = cfg.settings();
    let estimates = cfg
        .estimators
        .iter()
        .map(|e| {
            let est = estimate(&sim.panel, 0, *e, cfg.transform_for(*e), &settings)?;
            let p = t_test(&est, null)?.p_value;
            Ok((est.point, p))
        })
        .collect();
    let tests = cfg
        .tests
        .iter()
        .map(|t| identification_test(*t, &sim.panel, &settings).map(|r| r.p_value))
        .collect();
    Ok(Draw { estimates, tests })
}

/// Zero-null tests on a single-control panel.
///
/// `id.*` test the estimator's contrast over the full sample: `id.did` is the
/// two-control difference test with the treated and control units as the
/// pair, `id.sc` the post-period mean gap and `id.ba` the treated unit's own
/// before-after change. `pt.*` are the pseudo-treatment versions computed on
/// pre-period data only, with the default split.
pub fn identification_test(test: McTest, panel: &Panel, s: &EstimationSettings) -> Result<TestRecord> {
    let regimes = panel.regimes();
    let n_pre = panel.n_pre();
    let gap = panel.gap(0)?;
    let treated = &panel.treated().values;
    let split = default_split(n_pre);
    match test {
        McTest::IdDid => {
            let pair = panel.with_series(
                Series::new("control", panel.controls()[0].values.clone()),
                vec![panel.treated().clone(), panel.controls()[0].clone()],
            )?;
            let mut r = two_control_difference_test(&pair, &s.wpost, &s.wpre, &s.hac)?;
            r.name = test.as_str().into();
            Ok(r)
        }
        McTest::IdSc => {
            let rw = crate::estimators::sc_regime_weights(panel, &s.wpost)?;
            contrast_test(test.as_str(), &gap, &rw, &regimes, &s.hac)
        }
        McTest::IdBa => {
            let rw = RegimeWeights::new(panel, &s.wpost, &s.wpre)?;
            contrast_test(test.as_str(), treated, &rw, &regimes, &s.hac)
        }
        McTest::PtDid | McTest::PtBa => {
            let series = if test == McTest::PtDid { &gap } else { treated };
            let mut r = pretrends_test_series(&series[..n_pre], split, &s.wpost, &s.wpre, &s.hac)?;
            r.name = test.as_str().into();
            Ok(r)
        }
        McTest::PtSc => {
            if split < 2 || split + 2 > n_pre {
                return Err(Error::Parameter(format!("pre-period too short for a pseudo split ({n_pre})")));
            }
            let post = s.wpost.realize(split)?;
            let rw = RegimeWeights::from_vectors(post, vec![0.0; n_pre - split], 0);
            let pseudo: Vec<Regime> = (0..n_pre)
                .map(|i| if i < n_pre - split { Regime::Pre } else { Regime::Post })
                .collect();
            contrast_test(test.as_str(), &gap[..n_pre], &rw, &pseudo, &s.hac)
        }
    }
}

fn allowed_failures(reps: usize) -> usize {
    (MAX_FAILURE_SHARE * reps as f64).floor() as usize
}

fn check_budget(what: &str, n: usize, failures: usize, reps: usize, first: Option<&Error>) -> Result<()> {
    if failures > allowed_failures(reps) {
        let cause = first.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Numeric(format!(
            "{what} failed in {failures} of {reps} replications at n = {n} (budget {}); first failure: {cause}",
            allowed_failures(reps)
        )));
    }
    Ok(())
}

/// Runs every replication for one sample size and design. Output order
/// follows the replication index regardless of scheduling.
fn simulate(cfg: &McConfig, spec: &DgpSpec, n: usize, null: f64) -> Result<Vec<Draw>> {
    let reps = cfg.replications;
    let draws: Vec<Result<Draw>> = cfg.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| run_replication(cfg, spec, n, r, null))
            .collect()
    })?;
    draws.into_iter().collect()
}

fn estimator_rows(cfg: &McConfig, n: usize, truth: f64, draws: &[Draw]) -> Result<Vec<EstimatorRow>> {
    let reps = cfg.replications;
    cfg.estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let ok: Vec<(f64, f64)> = draws
                .iter()
                .filter_map(|d| d.estimates[k].as_ref().ok().copied())
                .collect();
            let first = draws.iter().find_map(|d| d.estimates[k].as_ref().err());
            let failures = reps - ok.len();
            check_budget(e.as_str(), n, failures, reps, first)?;
            let errs: Vec<f64> = ok.iter().map(|(pt, _)| pt - truth).collect();
            let m = errs.len() as f64;
            let abs: Vec<f64> = errs.iter().map(|v| v.abs()).collect();
            let p: Vec<f64> = ok.iter().map(|(_, p)| *p).collect();
            Ok(EstimatorRow {
                estimator: *e,
                transform: cfg.transform_for(*e),
                sample_size: n,
                truth,
                mb: errs.iter().sum::<f64>() / m,
                mad: median(&abs),
                rmse: (errs.iter().map(|v| v * v).sum::<f64>() / m).sqrt(),
                rejections: Rejections::from_p_values(&p),
                replications: ok.len(),
                failures,
            })
        })
        .collect()
}

fn test_rows(cfg: &McConfig, n: usize, draws: &[Draw]) -> Result<Vec<TestRow>> {
    let reps = cfg.replications;
    cfg.tests
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let p: Vec<f64> = draws.iter().filter_map(|d| d.tests[k].as_ref().ok().copied()).collect();
            let first = draws.iter().find_map(|d| d.tests[k].as_ref().err());
            let failures = reps - p.len();
            check_budget(t.as_str(), n, failures, reps, first)?;
            Ok(TestRow {
                test: *t,
                sample_size: n,
                rejections: Rejections::from_p_values(&p),
                replications: p.len(),
                failures,
            })
        })
        .collect()
}

/// Bias, MAD, RMSE and rejection rates per estimator and sample size.
pub fn run_table(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let mut report = McReport {
        schema_version: SCHEMA_VERSION,
        design: cfg.dgp.name.clone(),
        seed: cfg.seed,
        replications: cfg.replications,
        estimators: Vec::new(),
        tests: Vec::new(),
    };
    for &n in &cfg.sample_sizes {
        let truth = true_att(&cfg.dgp, &cfg.wpost, n)?;
        let null = cfg.null_value.unwrap_or(truth);
        let draws = simulate(cfg, &cfg.dgp, n, null)?;
        report.estimators.extend(estimator_rows(cfg, n, truth, &draws)?);
        report.tests.extend(test_rows(cfg, n, &draws)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub grid_value: f64,
    /// `att.<estimator>` for estimator t-tests, otherwise the test name.
    pub test: String,
    pub sample_size: usize,
    pub level: f64,
    pub rate: f64,
    pub mcse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub schema_version: u32,
    pub design: String,
    pub grid_kind: GridKind,
    pub points: Vec<PowerPoint>,
}

impl PowerCurve {
    /// Rates for one test, sample size and level, in grid order.
    pub fn series(&self, test: &str, sample_size: usize, level: f64) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.test == test && p.sample_size == sample_size && (p.level - level).abs() < 1e-12)
            .map(|p| (p.grid_value, p.rate))
            .collect()
    }
}

/// Rejection rates along a grid of constant ATT levels or violation
/// intensities. Estimator t-tests use `null_value` (zero by default). Every
/// grid point reuses the same random draws, so curves are smooth in the grid.
pub fn run_power_curve(cfg: &McConfig, kind: GridKind, grid: &[f64]) -> Result<PowerCurve> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::Parameter("power grid is empty".into()));
    }
    if kind == GridKind::Intensity && !cfg.dgp.violation.has_intensity() {
        return Err(Error::Parameter(format!(
            "design '{}' has no violation intensity to vary",
            cfg.dgp.name
        )));
    }
    let null = cfg.null_value.unwrap_or(0.0);
    let mut points = Vec::new();
    for &g in grid {
        let spec = match kind {
            GridKind::Att => cfg.dgp.clone().with_att(AttPath::Constant { value: g }),
            GridKind::Intensity => cfg.dgp.clone().with_intensity(g),
        };
        for &n in &cfg.sample_sizes {
            let draws = simulate(cfg, &spec, n, null)?;
            let truth = true_att(&spec, &cfg.wpost, n)?;
            let mut push = |name: String, r: &Rejections| {
                for level in LEVELS {
                    let rate = r.at(level);
                    points.push(PowerPoint {
                        grid_value: g,
                        test: name.clone(),
                        sample_size: n,
                        level,
                        rate,
                        mcse: (rate * (1.0 - rate) / cfg.replications as f64).sqrt(),
                    });
                }
            };
            for row in estimator_rows(cfg, n, truth, &draws)? {
                push(format!("att.{}", row.estimator.as_str()), &row.rejections);
            }
            for row in test_rows(cfg, n, &draws)? {
                push(row.test.as_str().to_string(), &row.rejections);
            }
        }
    }
    Ok(PowerCurve {
        schema_version: SCHEMA_VERSION,
        design: cfg.dgp.name.clone(),
        grid_kind: kind,
        points,
    })
}

/// Reference values for named designs at `n` pre- and post-periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceValue {
    pub design: &'static str,
    pub sine_path: bool,
    pub sample_size: usize,
    pub estimator: EstimatorKind,
    pub metric: Metric,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Mb,
    Rmse,
    Rej5,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Mb => "mb",
            Metric::Rmse => "rmse",
            Metric::Rej5 => "rej5",
        }
    }

    pub fn of(&self, row: &EstimatorRow) -> f64 {
        match self {
            Metric::Mb => row.mb,
            Metric::Rmse => row.rmse,
            Metric::Rej5 => row.rejections.rej_5,
        }
    }
}

const fn rv(
    design: &'static str,
    sine_path: bool,
    sample_size: usize,
    estimator: EstimatorKind,
    metric: Metric,
    value: f64,
    tolerance: f64,
) -> ReferenceValue {
    ReferenceValue {
        design,
        sine_path,
        sample_size,
        estimator,
        metric,
        value,
        tolerance,
    }
}

/// Tolerances cover at least three Monte Carlo standard errors at 2,000
/// replications.
pub const REFERENCE_VALUES: [ReferenceValue; 12] = [
    rv("SC-BA", false, 100, EstimatorKind::Tdid, Metric::Mb, 0.0, 0.005),
    rv("SC-BA", false, 100, EstimatorKind::Tdid, Metric::Rmse, 0.108, 0.010),
    rv("SC-BA", false, 100, EstimatorKind::Tdid, Metric::Rej5, 0.050, 0.015),
    rv("SC-BA", false, 25, EstimatorKind::Tdid, Metric::Rmse, 0.216, 0.020),
    rv("SC-BA", false, 400, EstimatorKind::Tdid, Metric::Rmse, 0.054, 0.005),
    rv("BA", false, 100, EstimatorKind::Sc, Metric::Mb, -1.0, 0.02),
    rv("SC", false, 100, EstimatorKind::Ba, Metric::Mb, 1.371, 0.05),
    rv("PT-NA-B", false, 400, EstimatorKind::Tdid, Metric::Rej5, 0.048, 0.015),
    rv("PT-NA-B", false, 400, EstimatorKind::Sc, Metric::Rej5, 0.648, 0.05),
    rv("SC-BA", true, 100, EstimatorKind::Tdid, Metric::Mb, 0.0, 0.005),
    rv("SC-BA", true, 100, EstimatorKind::Tdid, Metric::Rej5, 0.042, 0.015),
    rv("SC-BA", true, 25, EstimatorKind::Tdid, Metric::Mb, 0.0, 0.02),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub design: String,
    pub sample_size: usize,
    pub estimator: EstimatorKind,
    pub metric: Metric,
    pub reference: f64,
    pub tolerance: f64,
    pub observed: f64,
    pub within: bool,
}

/// Compares a report with the reference values that apply to its design,
/// weighting and sample sizes. Only zero-null, uniformly weighted runs of an
/// unmodified preset are comparable.
pub fn reference_checks(cfg: &McConfig, report: &McReport) -> Vec<ReferenceCheck> {
    let Ok(base) = crate::dgp::preset(&cfg.dgp.name) else {
        return Vec::new();
    };
    let sine = cfg.dgp.att_path == AttPath::Sine;
    let comparable = cfg.dgp.clone().with_att(base.att_path) == base
        && (sine || cfg.dgp.att_path == AttPath::Constant { value: 0.0 })
        && cfg.wpost == WeightingScheme::Uniform
        && cfg.wpre == WeightingScheme::Uniform
        && cfg.null_value.is_none();
    if !comparable {
        return Vec::new();
    }
    REFERENCE_VALUES
        .iter()
        .filter(|r| r.design == base.name && r.sine_path == sine)
        .filter_map(|r| {
            let row = report.estimator_row(r.estimator, r.sample_size)?;
            let observed = r.metric.of(row);
            Some(ReferenceCheck {
                design: r.design.into(),
                sample_size: r.sample_size,
                estimator: r.estimator,
                metric: r.metric,
                reference: r.value,
                tolerance: r.tolerance,
                observed,
                within: (observed - r.value).abs() <= r.tolerance,
            })
        })
        .collect()
}

pub const ESTIMATOR_CSV_HEADER: [&str; 17] = [
    "design",
    "estimator",
    "transform",
    "sample_size",
    "truth",
    "mb",
    "mad",
    "rmse",
    "rej_1",
    "rej_5",
    "rej_10",
    "mcse_1",
    "mcse_5",
    "mcse_10",
    "replications",
    "failures",
    "seed",
];

pub const TEST_CSV_HEADER: [&str; 12] = [
    "design",
    "test",
    "sample_size",
    "rej_1",
    "rej_5",
    "rej_10",
    "mcse_1",
    "mcse_5",
    "mcse_10",
    "replications",
    "failures",
    "seed",
];

pub const POWER_CSV_HEADER: [&str; 7] = ["design", "grid_value", "test", "sample_size", "level", "rate", "mcse"];

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl McReport {
    pub fn estimator_records(&self) -> Vec<Vec<String>> {
        self.estimators
            .iter()
            .map(|r| {
                let q = &r.rejections;
                vec![
                    self.design.clone(),
                    r.estimator.as_str().into(),
                    r.transform.as_str().into(),
                    r.sample_size.to_string(),
                    fmt_f64(r.truth),
                    fmt_f64(r.mb),
                    fmt_f64(r.mad),
                    fmt_f64(r.rmse),
                    fmt_f64(q.rej_1),
                    fmt_f64(q.rej_5),
                    fmt_f64(q.rej_10),
                    fmt_f64(q.mcse_1),
                    fmt_f64(q.mcse_5),
                    fmt_f64(q.mcse_10),
                    r.replications.to_string(),
                    r.failures.to_string(),
                    self.seed.to_string(),
                ]
            })
            .collect()
    }

    pub fn test_records(&self) -> Vec<Vec<String>> {
        self.tests
            .iter()
            .map(|r| {
                let q = &r.rejections;
                vec![
                    self.design.clone(),
                    r.test.as_str().into(),
                    r.sample_size.to_string(),
                    fmt_f64(q.rej_1),
                    fmt_f64(q.rej_5),
                    fmt_f64(q.rej_10),
                    fmt_f64(q.mcse_1),
                    fmt_f64(q.mcse_5),
                    fmt_f64(q.mcse_10),
                    r.replications.to_string(),
                    r.failures.to_string(),
                    self.seed.to_string(),
                ]
            })
            .collect()
    }
}

impl PowerCurve {
    pub fn records(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    self.design.clone(),
                    fmt_f64(p.grid_value),
                    p.test.clone(),
                    p.sample_size.to_string(),
                    fmt_f64(p.level),
                    fmt_f64(p.rate),
                    fmt_f64(p.mcse),
                ]
            })
            .collect()
    }
}
