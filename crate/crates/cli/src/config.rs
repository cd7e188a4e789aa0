//! TOML run configuration for `tdid mc`.
//!
//! ```toml
//! seed = 20240601
//! replications = 2000
//! sample_sizes = [100, 400]
//! estimators = ["did", "sc", "ba"]
//! tests = ["id.did", "pt.did"]
//! hac_lag = "auto"          # "auto", "rule" or an integer
//! wpost = "uniform"
//! wpre = "uniform"
//!
//! [dgp]
//! preset = "sc-ba"
//!
//! [power]                   # optional
//! kind = "intensity"        # or "att"
//! grid = [0.0, 0.25, 0.5, 0.75, 1.0]
//! ```

use serde::Deserialize;
use tdid::dgp::DgpConfig;
use tdid::montecarlo::{GridKind, McConfig, McTest};
use tdid::{EstimatorKind, HacSpec, TransformKind, WeightingScheme};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LagSetting {
    Fixed(usize),
    Named(String),
}

impl LagSetting {
    pub fn to_spec(&self) -> Result<HacSpec> {
        match self {
            LagSetting::Fixed(l) => Ok(HacSpec::fixed(*l)),
            LagSetting::Named(s) => parse_hac(s),
        }
    }
}

/// `auto`, `rule` or a fixed lag.
pub fn parse_hac(s: &str) -> Result<HacSpec> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(HacSpec::auto()),
        "rule" => Ok(HacSpec::rule()),
        other => other
            .parse::<usize>()
            .map(HacSpec::fixed)
            .map_err(|_| CliError::Input(format!("HAC lag '{s}' is not auto, rule or an integer"))),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub kind: GridKind,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McFile {
    pub dgp: DgpConfig,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub sample_sizes: Option<Vec<usize>>,
    pub estimators: Option<Vec<String>>,
    #[serde(default)]
    pub tests: Vec<String>,
    /// Null for the estimator t-tests; omitted means the true ATT.
    pub null: Option<f64>,
    pub transform: Option<String>,
    pub hac_lag: Option<LagSetting>,
    pub wpost: Option<String>,
    pub wpre: Option<String>,
    pub threads: Option<usize>,
    pub power: Option<PowerSection>,
}

impl McFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_config(&self) -> Result<McConfig> {
        let dgp = self.dgp.resolve()?;
        let mut cfg = McConfig::new(dgp);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        if let Some(n) = &self.sample_sizes {
            cfg.sample_sizes = n.clone();
        }
        if let Some(list) = &self.estimators {
            if list.is_empty() {
                return Err(CliError::Config("estimator set is empty".into()));
            }
            cfg.estimators = list
                .iter()
                .map(|e| e.parse::<EstimatorKind>())
                .collect::<tdid::Result<_>>()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        cfg.tests = self
            .tests
            .iter()
            .map(|t| t.parse::<McTest>())
            .collect::<tdid::Result<_>>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.null_value = self.null;
        if let Some(t) = &self.transform {
            cfg.transform = Some(t.parse::<TransformKind>().map_err(|e| CliError::Config(e.to_string()))?);
        }
        if let Some(l) = &self.hac_lag {
            cfg.hac = l.to_spec().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let scheme = |s: &Option<String>| -> Result<WeightingScheme> {
            s.as_deref()
                .map_or(Ok(WeightingScheme::Uniform), str::parse)
                .map_err(|e: tdid::Error| CliError::Config(e.to_string()))
        };
        cfg.wpost = scheme(&self.wpost)?;
        cfg.wpre = scheme(&self.wpre)?;
        cfg.threads = self.threads;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}
