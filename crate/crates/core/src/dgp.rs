//! Seeded simulation designs: one treated and one control unit whose
//! untreated outcomes share a common trend and a common error component.
//!
//! ```text
//! Y_d(0)_t = a0 + d(a1 - a0) + a2 Y_d(0)_{t-1} + phi(t) + d nu_t
//!            + (1 - d(1 - 1/sqrt 2)) (e0_t + a3 e0_{t-1})
//! Y_d_t    = Y_d(0)_t + d (ATT(t) + a2 (Y_d_{t-1} - Y_d(0)_{t-1}) + a4 t
//!            + (e1_t + a3 e1_{t-1}) / sqrt 2)
//! ```
//!
//! Periods run from `-n_pre` to `n_post` with a one-period window at `t = 0`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, Series};
use crate::weights::WeightingScheme;

/// Periods simulated and discarded before the sample starts.
pub const BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    None,
    /// `sqrt(2) 1{t >= 4}`.
    BoundedBinary,
    /// `cos(t)`.
    BoundedCosine,
    /// `t + t^2 / 500`.
    Quadratic,
}

impl Trend {
    pub fn value(&self, t: i64) -> f64 {
        let tf = t as f64;
        match self {
            Trend::None => 0.0,
            Trend::BoundedBinary => {
                if t >= 4 {
                    SQRT_2
                } else {
                    0.0
                }
            }
            Trend::BoundedCosine => tf.cos(),
            Trend::Quadratic => tf + tf * tf / 500.0,
        }
    }
}

/// The treated-unit-only term `nu_t` that breaks standard parallel trends
/// or no-anticipation. Variants other than `None` draw `N(mean(t), 1)` where
/// they are active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    None,
    /// Mean `scale sgn(t) |t|^-power`.
    SignedDecay { scale: f64, power: f64 },
    /// Mean `scale |t|^-power`.
    Decay { scale: f64, power: f64 },
    /// Mean `2.5 h |t|^-0.25` for `t <= -1`; exactly zero otherwise.
    PreOnly { h: f64 },
    /// Mean `2.5 h |t|^-0.25` for `t >= 1`; exactly zero otherwise.
    PostOnly { h: f64 },
    /// Mean `2.5 (1 - h(1 - sgn t)) |t|^-0.25` in every period.
    SignFlip { h: f64 },
}

fn decay(t: i64, power: f64) -> f64 {
    if t == 0 {
        0.0
    } else {
        (t.unsigned_abs() as f64).powf(-power)
    }
}

fn sgn(t: i64) -> f64 {
    t.signum() as f64
}

impl Violation {
    /// `Some(mean)` when `nu_t` is drawn at `t`, `None` when it is zero.
    pub fn mean(&self, t: i64) -> Option<f64> {
        match *self {
            Violation::None => None,
            Violation::SignedDecay { scale, power } => Some(scale * sgn(t) * decay(t, power)),
            Violation::Decay { scale, power } => Some(scale * decay(t, power)),
            Violation::PreOnly { h } => (t <= -1).then(|| 2.5 * h * decay(t, 0.25)),
            Violation::PostOnly { h } => (t >= 1).then(|| 2.5 * h * decay(t, 0.25)),
            Violation::SignFlip { h } => Some(2.5 * (1.0 - h * (1.0 - sgn(t))) * decay(t, 0.25)),
        }
    }

    /// Same pattern with intensity `h`; patterns without an intensity are
    /// returned unchanged.
    pub fn with_intensity(&self, h: f64) -> Violation {
        match *self {
            Violation::PreOnly { .. } => Violation::PreOnly { h },
            Violation::PostOnly { .. } => Violation::PostOnly { h },
            Violation::SignFlip { .. } => Violation::SignFlip { h },
            other => other,
        }
    }

    pub fn has_intensity(&self) -> bool {
        matches!(
            self,
            Violation::PreOnly { .. } | Violation::PostOnly { .. } | Violation::SignFlip { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorProcess {
    /// No noise at all.
    Off,
    /// `eps_t eps_{t-1}`.
    Mds,
    /// `sigma_t eps_t`, `sigma_t^2 = 0.4 + 0.3 e_{t-1}^2 + 0.3 sigma_{t-1}^2`.
    Garch,
    /// `(eps_t + eps_{t-1} eps_{t-2}) / sqrt 2`.
    WhiteNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttPath {
    Constant { value: f64 },
    /// `sin(t) / pi`.
    Sine,
}

impl AttPath {
    /// Effect at period `t`; zero for `t <= 0`.
    pub fn value(&self, t: i64) -> f64 {
        if t <= 0 {
            return 0.0;
        }
        match self {
            AttPath::Constant { value } => *value,
            AttPath::Sine => (t as f64).sin() / PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub trend: Trend,
    pub violation: Violation,
    pub error: ErrorProcess,
    pub att_path: AttPath,
}

pub const PRESET_NAMES: [&str; 14] = [
    "SC-BA",
    "BA",
    "SC",
    "PT-NA-A",
    "PT-NA-B",
    "GARCH",
    "MA1",
    "AR1",
    "U-R",
    "Q-T",
    "T-T",
    "idTest-I",
    "idTest-II",
    "idTest-III",
];

fn canonical(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Named designs. Lookup ignores case and punctuation, so `PT-NA (A)`,
/// `ptna-a` and `PT-NA-A` are the same preset.
pub fn preset(name: &str) -> Result<DgpSpec> {
    let base = DgpSpec {
        name: String::new(),
        alpha0: 0.5,
        alpha1: 0.5,
        alpha2: 0.0,
        alpha3: 0.0,
        alpha4: 0.0,
        trend: Trend::None,
        violation: Violation::None,
        error: ErrorProcess::Mds,
        att_path: AttPath::Constant { value: 0.0 },
    };
    let key = canonical(name);
    let (label, spec) = match key.as_str() {
        "scba" => ("SC-BA", base),
        "ba" => ("BA", DgpSpec { alpha1: -0.5, ..base }),
        "sc" => ("SC", DgpSpec { trend: Trend::BoundedBinary, ..base }),
        "ptnaa" => (
            "PT-NA-A",
            DgpSpec {
                violation: Violation::SignedDecay { scale: 0.5, power: 0.9 },
                ..base
            },
        ),
        "ptnab" => (
            "PT-NA-B",
            DgpSpec {
                violation: Violation::Decay { scale: 0.5, power: 0.25 },
                ..base
            },
        ),
        "garch" | "garch11" => ("GARCH", DgpSpec { error: ErrorProcess::Garch, ..base }),
        "ma1" => (
            "MA1",
            DgpSpec {
                alpha3: 0.25,
                error: ErrorProcess::WhiteNoise,
                ..base
            },
        ),
        "ar1" => (
            "AR1",
            DgpSpec {
                alpha2: 0.5,
                trend: Trend::BoundedCosine,
                error: ErrorProcess::WhiteNoise,
                ..base
            },
        ),
        "ur" => (
            "U-R",
            DgpSpec {
                alpha2: 1.0,
                error: ErrorProcess::WhiteNoise,
                ..base
            },
        ),
        "qt" => (
            "Q-T",
            DgpSpec {
                trend: Trend::Quadratic,
                error: ErrorProcess::WhiteNoise,
                ..base
            },
        ),
        "tt" => ("T-T", DgpSpec { alpha4: 1.0, ..base }),
        "idtesti" | "idtest1" => (
            "idTest-I",
            DgpSpec {
                alpha1: -0.5,
                violation: Violation::PreOnly { h: 0.0 },
                ..base
            },
        ),
        "idtestii" | "idtest2" => (
            "idTest-II",
            DgpSpec {
                trend: Trend::BoundedBinary,
                violation: Violation::PostOnly { h: 0.0 },
                ..base
            },
        ),
        "idtestiii" | "idtest3" => (
            "idTest-III",
            DgpSpec {
                alpha1: -0.5,
                trend: Trend::BoundedBinary,
                violation: Violation::SignFlip { h: 0.0 },
                ..base
            },
        ),
        _ => {
            return Err(Error::Parameter(format!(
                "unknown preset '{name}'; known presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(DgpSpec {
        name: label.to_string(),
        ..spec
    })
}

/// Preset name plus optional field overrides, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub preset: String,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub alpha3: Option<f64>,
    pub alpha4: Option<f64>,
    pub trend: Option<Trend>,
    pub violation: Option<Violation>,
    pub error: Option<ErrorProcess>,
    pub att_path: Option<AttPath>,
    /// Violation intensity for the identification-test designs.
    pub h: Option<f64>,
}

impl DgpConfig {
    pub fn resolve(&self) -> Result<DgpSpec> {
        let mut s = preset(&self.preset)?;
        if let Some(v) = self.alpha0 {
            s.alpha0 = v;
        }
        if let Some(v) = self.alpha1 {
            s.alpha1 = v;
        }
        if let Some(v) = self.alpha2 {
            s.alpha2 = v;
        }
        if let Some(v) = self.alpha3 {
            s.alpha3 = v;
        }
        if let Some(v) = self.alpha4 {
            s.alpha4 = v;
        }
        if let Some(v) = self.trend {
            s.trend = v;
        }
        if let Some(v) = self.violation {
            s.violation = v;
        }
        if let Some(v) = self.error {
            s.error = v;
        }
        if let Some(v) = self.att_path {
            s.att_path = v;
        }
        if let Some(h) = self.h {
            s.violation = s.violation.with_intensity(h);
        }
        Ok(s)
    }
}

impl DgpSpec {
    pub fn with_att(mut self, path: AttPath) -> Self {
        self.att_path = path;
        self
    }

    pub fn with_intensity(mut self, h: f64) -> Self {
        self.violation = self.violation.with_intensity(h);
        self
    }

    pub fn validate(&self, n_post: usize) -> Result<()> {
        let coefs = [self.alpha0, self.alpha1, self.alpha2, self.alpha3, self.alpha4];
        if coefs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("design coefficients must be finite".into()));
        }
        if self.error != ErrorProcess::Off && n_post <= 2 {
            return Err(Error::Parameter(format!(
                "Student-t innovations need more than 2 post-periods for a finite variance, got {n_post}"
            )));
        }
        Ok(())
    }
}

/// `sum_t w_T(t) ATT(t)` over `t = 1..=n_post`.
pub fn true_att(spec: &DgpSpec, wpost: &WeightingScheme, n_post: usize) -> Result<f64> {
    let w = wpost.realize(n_post)?;
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| wi * spec.att_path.value(i as i64 + 1))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: Panel,
    /// Uniformly weighted post-period ATT.
    pub true_att: f64,
}

/// Independent stream for replication `replication` of the simulation tagged
/// `tag` (typically the sample size). Streams do not depend on the order in
/// which replications run.
pub fn replication_rng(master_seed: u64, tag: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(tag)));
    rng.set_stream(replication);
    rng
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Error process state for one of the two innovation sequences.
struct ErrorState {
    kind: ErrorProcess,
    eps1: f64,
    eps2: f64,
    e_prev: f64,
    sigma2: f64,
}

impl ErrorState {
    fn new(kind: ErrorProcess) -> Self {
        ErrorState {
            kind,
            eps1: 0.0,
            eps2: 0.0,
            e_prev: 0.0,
            sigma2: 1.0,
        }
    }

    fn step(&mut self, eps: f64) -> f64 {
        let e = match self.kind {
            ErrorProcess::Off => 0.0,
            ErrorProcess::Mds => eps * self.eps1,
            ErrorProcess::Garch => {
                self.sigma2 = 0.4 + 0.3 * self.e_prev * self.e_prev + 0.3 * self.sigma2;
                self.sigma2.sqrt() * eps
            }
            ErrorProcess::WhiteNoise => (eps + self.eps1 * self.eps2) * FRAC_1_SQRT_2,
        };
        self.eps2 = self.eps1;
        self.eps1 = eps;
        self.e_prev = e;
        e
    }
}

/// Innovation draws for one period.
struct Innovations {
    t_dist: Option<StudentT<f64>>,
    t_scale: f64,
}

impl Innovations {
    fn new(kind: ErrorProcess, n_post: usize) -> Result<Self> {
        if kind == ErrorProcess::Off {
            return Ok(Innovations { t_dist: None, t_scale: 1.0 });
        }
        let df = n_post as f64;
        let t_dist = StudentT::new(df).map_err(|e| Error::Parameter(format!("Student-t: {e}")))?;
        Ok(Innovations {
            t_dist: Some(t_dist),
            t_scale: (df / (df - 2.0)).sqrt(),
        })
    }

    /// `((chi2_1 - 1)/sqrt 2, t_T / sqrt(T/(T-2)))`.
    fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        match &self.t_dist {
            None => (0.0, 0.0),
            Some(t) => {
                let z: f64 = rng.sample(StandardNormal);
                let eps0 = (z * z - 1.0) * FRAC_1_SQRT_2;
                let eps1 = t.sample(rng) / self.t_scale;
                (eps0, eps1)
            }
        }
    }
}

/// Raw simulated paths over the sample window.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPaths {
    /// Period labels `-n_pre..=n_post`.
    pub periods: Vec<i64>,
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
    /// Untreated potential outcome of the treated unit.
    pub treated_untreated: Vec<f64>,
    /// `e0` and `e1` innovation processes (before MA mixing).
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
}

pub fn simulate_paths<R: Rng>(spec: &DgpSpec, n_pre: usize, n_post: usize, rng: &mut R) -> Result<SimulatedPaths> {
    spec.validate(n_post)?;
    let innov = Innovations::new(spec.error, n_post)?;
    let mut s0 = ErrorState::new(spec.error);
    let mut s1 = ErrorState::new(spec.error);
    let first = -(n_pre as i64) - BURN_IN as i64;
    let last = n_post as i64;
    let cap = n_pre + 1 + n_post;
    let mut out = SimulatedPaths {
        periods: Vec::with_capacity(cap),
        treated: Vec::with_capacity(cap),
        control: Vec::with_capacity(cap),
        treated_untreated: Vec::with_capacity(cap),
        e0: Vec::with_capacity(cap),
        e1: Vec::with_capacity(cap),
    };
    let (mut y00, mut y10, mut tau) = (0.0, 0.0, 0.0);
    let (mut e0_prev, mut e1_prev) = (0.0, 0.0);
    for t in first..=last {
        let (eps0, eps1) = innov.draw(rng);
        let nu_noise: f64 = rng.sample(StandardNormal);
        let e0 = s0.step(eps0);
        let e1 = s1.step(eps1);
        let nu = spec.violation.mean(t).map_or(0.0, |m| m + nu_noise);
        let phi = spec.trend.value(t);
        let common = e0 + spec.alpha3 * e0_prev;
        y00 = spec.alpha0 + spec.alpha2 * y00 + phi + common;
        y10 = spec.alpha1 + spec.alpha2 * y10 + phi + nu + FRAC_1_SQRT_2 * common;
        tau = spec.att_path.value(t)
            + spec.alpha2 * tau
            + spec.alpha4 * t as f64
            + FRAC_1_SQRT_2 * (e1 + spec.alpha3 * e1_prev);
        e0_prev = e0;
        e1_prev = e1;
        if t >= -(n_pre as i64) {
            out.periods.push(t);
            out.control.push(y00);
            out.treated_untreated.push(y10);
            out.treated.push(y10 + tau);
            out.e0.push(e0);
            out.e1.push(e1);
        }
    }
    Ok(out)
}

pub fn generate_with_rng<R: Rng>(spec: &DgpSpec, n_pre: usize, n_post: usize, rng: &mut R) -> Result<SimulatedPanel> {
    let paths = simulate_paths(spec, n_pre, n_post, rng)?;
    let panel = Panel::with_periods(
        Series::new("treated", paths.treated),
        vec![Series::new("control", paths.control)],
        paths.periods,
        n_pre,
        1,
        n_post,
    )?;
    Ok(SimulatedPanel {
        panel,
        true_att: true_att(spec, &WeightingScheme::Uniform, n_post)?,
    })
}

/// Bit-reproducible draw given `(spec, n_pre, n_post, seed)`.
pub fn generate(spec: &DgpSpec, n_pre: usize, n_post: usize, seed: u64) -> Result<SimulatedPanel> {
    let mut rng = replication_rng(seed, 0, 0);
    generate_with_rng(spec, n_pre, n_post, &mut rng)
}
