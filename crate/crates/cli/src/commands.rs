use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tdid::diagnostics::{tdid_diagnostics, DiagnosticsReport, Deterministic, LagChoice};
use tdid::dgp::{generate, preset, DgpConfig};
use tdid::montecarlo::{
    reference_checks, run_power_curve, run_table, McConfig, ESTIMATOR_CSV_HEADER, POWER_CSV_HEADER, SCHEMA_VERSION,
    TEST_CSV_HEADER,
};
use tdid::multicontrol::{estimate_vector, overid_test, pretrends_test, OveridResult};
use tdid::pipeline::{check_combination, estimate, EstimationSettings};
use tdid::transforms::{first_difference, lambda_grid, trend_matrices_min_eig_scan};
use tdid::{AttEstimate, EstimatorKind, TestRecord, TransformKind, WeightingScheme};

use crate::config::{parse_hac, McFile};
use crate::error::{CliError, Result};
use crate::panel_io::{read_sidecar, sidecar_path, PanelFile, Window};
use crate::worldbank::{Client, FixtureTransport, HttpTransport, Transport, DEFAULT_BASE_URL, DEFAULT_PER_PAGE};

const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Parser)]
#[command(name = "tdid", version, about = "Temporal difference-in-differences estimation and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the ATT from a panel CSV
    Estimate(EstimateArgs),
    /// Simulate a panel from a design and print it as CSV
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study from a TOML config
    Mc(McArgs),
    /// Download an indicator from the World Bank API into a panel CSV
    FetchWorldbank(FetchArgs),
    /// Minimum eigenvalues of the trend-regression matrices over a lambda grid
    Eigscan(EigscanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Panel CSV: period, treated unit, control units
    pub panel: PathBuf,
    /// Treatment window as inclusive period labels, e.g. 1990:1992
    /// (defaults to the contents of <panel>.window)
    #[arg(long)]
    pub window: Option<String>,
    /// Comma-separated estimators: did, sc, ba
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,
    /// none, first-difference, ar1-augment or detrend
    #[arg(long, default_value = "none")]
    pub transform: String,
    /// Weighting schemes, e.g. post=uniform pre=linear:0.25
    #[arg(long, num_args = 1..)]
    pub weights: Vec<String>,
    /// Bartlett lag: auto, rule or an integer
    #[arg(long, default_value = "auto")]
    pub hac_lag: String,
    /// Estimate on natural logs of the outcomes
    #[arg(long)]
    pub log: bool,
    /// Output format for standard output
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write the JSON report to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design preset, e.g. sc-ba, pt-na-b, idtest-i
    #[arg(long, default_value = "sc-ba")]
    pub preset: String,
    /// TOML file with a preset name and field overrides (takes precedence over --preset)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of pre-treatment periods
    #[arg(long, default_value_t = 100)]
    pub pre: usize,
    /// Number of post-treatment periods
    #[arg(long, default_value_t = 100)]
    pub post: usize,
    /// Violation intensity for the identification-test designs
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write the CSV and a window file here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// TOML config; without it --preset runs a default table
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Directory for the CSV and JSON outputs
    #[arg(long, default_value = "mc-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Comma-separated ISO3 codes; the first is the treated unit
    #[arg(long, value_delimiter = ',', required = true)]
    pub countries: Vec<String>,
    #[arg(long, default_value = "NY.GDP.PCAP.KD")]
    pub indicator: String,
    /// Inclusive year range, e.g. 1960:2018
    #[arg(long)]
    pub years: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Replay recorded responses from this directory instead of the network
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_BASE_URL)]
    pub base_url: String,
    #[arg(long, default_value_t = DEFAULT_PER_PAGE)]
    pub per_page: usize,
}

#[derive(Debug, Args)]
pub struct EigscanArgs {
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Write CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Mc(a) => cmd_mc(&a, stdout),
        Command::FetchWorldbank(a) => cmd_fetch(&a, stdout),
        Command::Eigscan(a) => cmd_eigscan(&a, stdout),
    }
}

fn write_out(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io("writing output", e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Input(format!("writing csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("writing csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses `post=<scheme>` / `pre=<scheme>` pairs.
pub fn parse_weights(items: &[String]) -> Result<(WeightingScheme, WeightingScheme)> {
    let mut post = WeightingScheme::Uniform;
    let mut pre = WeightingScheme::Uniform;
    for item in items {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("weights '{item}' is not of the form post=... or pre=...")))?;
        let scheme: WeightingScheme = value.parse()?;
        match key.trim() {
            "post" => post = scheme,
            "pre" => pre = scheme,
            other => return Err(CliError::Input(format!("unknown weights key '{other}'"))),
        }
    }
    Ok((post, pre))
}

#[derive(Debug, Serialize)]
pub struct EstimateRow {
    pub control: String,
    pub ci95: Option<[f64; 2]>,
    #[serde(flatten)]
    pub estimate: AttEstimate,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub treated: String,
    pub window: String,
    pub outcome: &'static str,
    pub transform: TransformKind,
    pub wpost: WeightingScheme,
    pub wpre: WeightingScheme,
    pub estimates: Vec<EstimateRow>,
    /// Efficient combination and over-identification test across controls.
    pub overid: Option<OveridResult>,
    pub pretrends: Vec<TestRecord>,
    pub diagnostics: Option<DiagnosticsReport>,
    pub notes: Vec<String>,
}

pub fn cmd_estimate(a: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let window = match &a.window {
        Some(w) => w.parse::<Window>()?,
        None => read_sidecar(&a.panel)?.ok_or_else(|| {
            CliError::Input(format!(
                "no treatment window: pass --window first:last or create {}",
                sidecar_path(&a.panel).display()
            ))
        })?,
    };
    let transform: TransformKind = a.transform.parse()?;
    let estimators: Vec<EstimatorKind> = if a.estimators.is_empty() {
        [EstimatorKind::Tdid, EstimatorKind::Sc, EstimatorKind::Ba]
            .into_iter()
            .filter(|&e| check_combination(e, transform).is_ok())
            .collect()
    } else {
        a.estimators.iter().map(|e| e.parse()).collect::<tdid::Result<_>>()?
    };
    for &e in &estimators {
        check_combination(e, transform)?;
    }
    let (wpost, wpre) = parse_weights(&a.weights)?;
    let settings = EstimationSettings {
        wpost,
        wpre,
        hac: parse_hac(&a.hac_lag)?,
    };

    let mut file = PanelFile::read_path(&a.panel)?;
    if a.log {
        file = file.to_log()?;
    }
    let panel = file.to_panel(window)?;
    let report = estimate_report(&panel, window, a.log, transform, &estimators, &settings)?;

    if let Some(path) = &a.out {
        write_file(path, to_json(&report).as_bytes())?;
    }
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => estimate_csv(&report)?,
        Format::Table => estimate_table(&report),
    };
    write_out(stdout, &text)
}

pub fn estimate_report(
    panel: &tdid::Panel,
    window: Window,
    log: bool,
    transform: TransformKind,
    estimators: &[EstimatorKind],
    settings: &EstimationSettings,
) -> Result<EstimateReport> {
    let mut notes = Vec::new();
    let mut estimates = Vec::new();
    for &e in estimators {
        // SC and BA do not use the controls jointly; BA ignores them entirely.
        let controls = if e == EstimatorKind::Ba { 1 } else { panel.n_controls() };
        for j in 0..controls {
            let est = estimate(panel, j, e, transform, settings)?;
            let ci95 = est.hac_se().map(|se| [est.point - Z_975 * se, est.point + Z_975 * se]);
            let control = if e == EstimatorKind::Ba {
                "-".to_string()
            } else {
                panel.controls()[j].label.clone()
            };
            estimates.push(EstimateRow {
                control,
                ci95,
                estimate: est,
            });
        }
    }

    let wants_tdid = estimators.contains(&EstimatorKind::Tdid);
    let mut overid = None;
    if wants_tdid && panel.n_controls() >= 2 {
        let base = match transform {
            TransformKind::None => Some(panel.clone()),
            TransformKind::FirstDifference => Some(first_difference(panel)?),
            _ => None,
        };
        match base {
            Some(p) => match estimate_vector(&p, &settings.wpost, &settings.wpre, &settings.hac).and_then(|v| overid_test(&v)) {
                Ok(r) => overid = Some(r),
                Err(e) => notes.push(format!("multi-control combination unavailable: {e}")),
            },
            None => notes.push(format!(
                "multi-control combination is computed for none and first-difference only, not {}",
                transform.as_str()
            )),
        }
    }

    let mut pretrends = Vec::new();
    if wants_tdid {
        for j in 0..panel.n_controls() {
            match pretrends_test(panel, j, None, &settings.wpost, &settings.wpre, &settings.hac) {
                Ok(mut t) => {
                    t.name = format!("pretrends.{}", panel.controls()[j].label);
                    pretrends.push(t);
                }
                Err(e) => notes.push(format!("pre-trends test vs {} unavailable: {e}", panel.controls()[j].label)),
            }
        }
    }

    let diagnostics = if wants_tdid {
        match tdid_diagnostics(panel, 0, transform, settings, LagChoice::Aic, Deterministic::ConstantTrend) {
            Ok(d) => Some(d),
            Err(e) => {
                notes.push(format!("diagnostics unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        treated: panel.treated().label.clone(),
        window: window.to_string(),
        outcome: if log { "log" } else { "level" },
        transform,
        wpost: settings.wpost.clone(),
        wpre: settings.wpre.clone(),
        estimates,
        overid,
        pretrends,
        diagnostics,
        notes,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

fn estimate_csv(r: &EstimateReport) -> Result<String> {
    let header = [
        "estimator", "control", "transform", "att", "hac_se", "t_stat", "p_value", "lag", "ci_low", "ci_high",
    ];
    let rows: Vec<Vec<String>> = r
        .estimates
        .iter()
        .map(|row| {
            let e = &row.estimate;
            vec![
                e.estimator.as_str().to_string(),
                row.control.clone(),
                e.transform.as_str().to_string(),
                format!("{:?}", e.point),
                opt(e.hac_se()),
                opt(e.t_stat()),
                opt(e.p_value()),
                e.inference.as_ref().map_or_else(String::new, |i| i.lag.to_string()),
                opt(row.ci95.map(|c| c[0])),
                opt(row.ci95.map(|c| c[1])),
            ]
        })
        .collect();
    csv_string(&header, &rows)
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn estimate_table(r: &EstimateReport) -> String {
    let mut s = format!(
        "treated {}  window {}  outcome {}  transform {}  weights post={} pre={}\n\n",
        r.treated,
        r.window,
        r.outcome,
        r.transform.as_str(),
        r.wpost,
        r.wpre
    );
    s += &format!(
        "{:<5} {:<12} {:>10} {:>10} {:>8} {:>8} {:>4} {:>22}\n",
        "est", "control", "att", "hac_se", "t", "p", "lag", "95% ci"
    );
    for row in &r.estimates {
        let e = &row.estimate;
        let ci = row
            .ci95
            .map_or_else(|| "-".into(), |c| format!("[{:.4}, {:.4}]", c[0], c[1]));
        s += &format!(
            "{:<5} {:<12} {:>10.4} {:>10} {:>8} {:>8} {:>4} {:>22}\n",
            e.estimator.as_str(),
            row.control,
            e.point,
            fmt4(e.hac_se()),
            fmt4(e.t_stat()),
            fmt4(e.p_value()),
            e.inference.as_ref().map_or_else(|| "-".into(), |i| i.lag.to_string()),
            ci
        );
        for c in &e.aux {
            s += &format!("      {:<10} {:>10.4} {:>10}\n", c.name, c.value, fmt4(c.se));
        }
    }
    if let Some(o) = &r.overid {
        let w: Vec<String> = o.efficient.weights.iter().map(|w| format!("{w:.4}")).collect();
        s += &format!(
            "\nefficient did {:.4} (se {:.4}), weights [{}]\nover-identification Q = {:.4}, df {}, p = {:.4}\n",
            o.efficient.point,
            o.efficient.se(),
            w.join(", "),
            o.q_stat,
            o.df,
            o.p_value
        );
    }
    if !r.pretrends.is_empty() {
        s += "\n";
        for t in &r.pretrends {
            s += &format!(
                "{:<24} {:>10.4} (se {:.4}), p = {:.4}\n",
                t.name, t.point, t.se, t.p_value
            );
        }
    }
    if let Some(d) = &r.diagnostics {
        s += &format!(
            "\nADF {:.4} (p {:.4}, lag {})  KPSS {:.4} (p {})  DW {:.4} (p {:.4})\n",
            d.adf.statistic,
            d.adf.p_value,
            d.adf.lag,
            d.kpss.statistic,
            d.kpss.p_label(),
            d.dw.statistic,
            d.dw.p_value
        );
    }
    for n in &r.notes {
        s += &format!("note: {n}\n");
    }
    s
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            toml::from_str::<DgpConfig>(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => DgpConfig {
            preset: a.preset.clone(),
            ..DgpConfig::default()
        },
    };
    if a.h.is_some() {
        cfg.h = a.h;
    }
    let spec = cfg.resolve()?;
    let sim = generate(&spec, a.pre, a.post, a.seed)?;
    let file = PanelFile::from_panel(&sim.panel);
    let mut buf = Vec::new();
    file.write(&mut buf)?;
    match &a.out {
        Some(path) => {
            write_file(path, &buf)?;
            write_file(&sidecar_path(path), b"0:0\n")?;
            write_out(
                stdout,
                &format!("wrote {} (window 0:0, true ATT {:?})\n", path.display(), sim.true_att),
            )
        }
        None => write_out(stdout, &String::from_utf8(buf).expect("csv output is utf-8")),
    }
}

pub fn cmd_mc(a: &McArgs, stdout: &mut dyn Write) -> Result<()> {
    let file = match (&a.config, &a.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            let mut f = McFile::parse(&text)?;
            if let Some(p) = &a.preset {
                f.dgp.preset = p.clone();
            }
            f
        }
        (None, Some(p)) => {
            preset(p)?;
            McFile::parse(&format!("[dgp]\npreset = {}\n", toml::Value::String(p.clone())))?
        }
        (None, None) => return Err(CliError::Input("pass a config file or --preset".into())),
    };
    let mut cfg: McConfig = file.to_config()?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(format!("creating {}", a.out.display()), e))?;

    let report = run_table(&cfg)?;
    write_file(
        &a.out.join("estimators.csv"),
        csv_string(&ESTIMATOR_CSV_HEADER, &report.estimator_records())?.as_bytes(),
    )?;
    write_file(
        &a.out.join("tests.csv"),
        csv_string(&TEST_CSV_HEADER, &report.test_records())?.as_bytes(),
    )?;
    write_file(&a.out.join("report.json"), to_json(&report).as_bytes())?;

    let mut text = String::new();
    for row in &report.estimators {
        text += &format!(
            "{:<10} {:<4} n={:<5} MB {:>8.4}  MAD {:>7.4}  RMSE {:>7.4}  Rej5 {:.3}  failures {}\n",
            report.design,
            row.estimator.as_str(),
            row.sample_size,
            row.mb,
            row.mad,
            row.rmse,
            row.rejections.rej_5,
            row.failures
        );
    }
    for row in &report.tests {
        text += &format!(
            "{:<10} {:<7} n={:<5} Rej5 {:.3}  failures {}\n",
            report.design,
            row.test.as_str(),
            row.sample_size,
            row.rejections.rej_5,
            row.failures
        );
    }
    for c in reference_checks(&cfg, &report) {
        text += &format!(
            "reference {} n={} {} {}: observed {:.4}, reference {:.3} +- {:.3} {}\n",
            c.design,
            c.sample_size,
            c.estimator.as_str(),
            c.metric.as_str(),
            c.observed,
            c.reference,
            c.tolerance,
            if c.within { "ok" } else { "OUTSIDE" }
        );
    }

    if let Some(p) = &file.power {
        let curve = run_power_curve(&cfg, p.kind, &p.grid)?;
        write_file(
            &a.out.join("power.csv"),
            csv_string(&POWER_CSV_HEADER, &curve.records())?.as_bytes(),
        )?;
        write_file(&a.out.join("power.json"), to_json(&curve).as_bytes())?;
        text += &format!("power curve: {} points\n", curve.points.len());
    }
    text += &format!("outputs in {}\n", a.out.display());
    write_out(stdout, &text)
}

fn parse_years(s: &str) -> Result<(i64, i64)> {
    let w: Window = s
        .parse()
        .map_err(|_| CliError::Input(format!("years '{s}' is not of the form first:last")))?;
    Ok((w.first, w.last))
}

pub fn cmd_fetch(a: &FetchArgs, stdout: &mut dyn Write) -> Result<()> {
    let (first, last) = parse_years(&a.years)?;
    let file = match &a.fixture {
        Some(dir) => fetch_with(FixtureTransport { dir: dir.clone() }, a, first, last)?,
        None => fetch_with(HttpTransport::new(a.base_url.clone()), a, first, last)?,
    };
    let mut buf = Vec::new();
    file.write(&mut buf)?;
    write_file(&a.out, &buf)?;
    write_out(
        stdout,
        &format!(
            "wrote {} ({} periods, units {})\n",
            a.out.display(),
            file.periods.len(),
            file.labels.join(", ")
        ),
    )
}

fn fetch_with<T: Transport>(t: T, a: &FetchArgs, first: i64, last: i64) -> Result<PanelFile> {
    let mut client = Client::new(t);
    client.per_page = a.per_page.max(1);
    client.fetch(&a.countries, &a.indicator, first, last)
}

pub fn cmd_eigscan(a: &EigscanArgs, stdout: &mut dyn Write) -> Result<()> {
    let rows = trend_matrices_min_eig_scan(&lambda_grid(a.points))?;
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            [r.lambda, r.mineig_qa, r.mineig_qb, r.mineig_q]
                .iter()
                .map(|v| format!("{v:?}"))
                .collect()
        })
        .collect();
    let text = csv_string(&["lambda", "mineig_qa", "mineig_qb", "mineig_q"], &records)?;
    match &a.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => write_out(stdout, &text),
    }
}
