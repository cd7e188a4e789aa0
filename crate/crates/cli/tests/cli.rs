use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tdid::dgp::{generate, preset};
use tdid::pipeline::EstimationSettings;
use tdid::{EstimatorKind, TransformKind};
use tdid_cli::commands::estimate_report;
use tdid_cli::panel_io::{PanelFile, Window};

fn tdid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/worldbank")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Control is a deterministic wiggle; treated = control + 1 + 0.5 after the window.
fn step_csv() -> String {
    let mut s = String::from("period,treated,control\n");
    for (i, year) in (1960..2000).enumerate() {
        let c = ((i * 7919) % 13) as f64 * 0.1;
        let noise = ((i * 31) % 7) as f64 * 0.01 - 0.03;
        let t = c + 1.0 + noise + if year > 1980 { 0.5 } else { 0.0 };
        s += &format!("{year},{t},{c}\n");
    }
    s
}

#[test]
fn known_step_is_recovered_inside_the_interval() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "step.csv", &step_csv());
    let o = tdid(&["estimate", &path, "--window", "1980:1980", "--estimators", "did", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    let row = &v["estimates"][0];
    let point = row["point"].as_f64().unwrap();
    let ci = row["ci95"].as_array().unwrap();
    assert!((point - 0.5).abs() < 0.02, "point {point}");
    assert!(ci[0].as_f64().unwrap() <= 0.5 && 0.5 <= ci[1].as_f64().unwrap());
}

#[test]
fn gap_year_is_a_validation_error_naming_the_period() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "gap.csv", "period,a,b\n1990,1,2\n1991,1,2\n1993,1,2\n");
    let o = tdid(&["estimate", &path, "--window", "1991:1991"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("1992") && err.contains("line 4"), "{err}");
}

#[test]
fn window_needs_two_periods_each_side() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "p.csv", &step_csv());
    let o = tdid(&["estimate", &path, "--window", "1961:1970"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 2"));
}

#[test]
fn log_of_non_positive_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = step_csv().replacen("\n1961,", "\n1961,-", 1);
    let path = write(dir.path(), "neg.csv", &csv);
    let o = tdid(&["estimate", &path, "--window", "1980:1980", "--log"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("period 1961"), "{}", stderr(&o));
}

#[test]
fn sidecar_window_is_used_when_the_flag_is_absent() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.csv", &step_csv());
    let missing = tdid(&["estimate", &path]);
    assert_eq!(missing.status.code(), Some(1));
    write(dir.path(), "s.csv.window", "1980:1980\n");
    let o = tdid(&["estimate", &path, "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("estimator,control,transform,att"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = tdid(&["simulate", "--preset", "sc-ba", "--seed", "42"]);
    let b = tdid(&["simulate", "--preset", "sc-ba", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 202);
    let c = tdid(&["simulate", "--preset", "sc-ba", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulated_panel_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let path = path.to_str().unwrap();
    let o = tdid(&["simulate", "--preset", "sc-ba", "--seed", "7", "--out", path]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = tdid(&["estimate", path, "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for row in v["estimates"].as_array().unwrap() {
        let p = row["inference"]["p_value"].as_f64().unwrap();
        assert!(p > 0.0 && p < 1.0, "p {p}");
    }
    let again = tdid(&["estimate", path, "--format", "json"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn first_differenced_unit_root_gap_looks_stationary() {
    let spec = preset("U-R").unwrap();
    let settings = EstimationSettings::default();
    let mut rejections = 0;
    for seed in 0..200 {
        let sim = generate(&spec, 100, 100, seed).unwrap();
        let mut buf = Vec::new();
        PanelFile::from_panel(&sim.panel).write(&mut buf).unwrap();
        let panel = PanelFile::read(buf.as_slice())
            .unwrap()
            .to_panel(Window { first: 0, last: 0 })
            .unwrap();
        let report = estimate_report(
            &panel,
            Window { first: 0, last: 0 },
            false,
            TransformKind::FirstDifference,
            &[EstimatorKind::Tdid],
            &settings,
        )
        .unwrap();
        if report.diagnostics.unwrap().adf.p_value < 0.05 {
            rejections += 1;
        }
    }
    assert!(rejections >= 180, "ADF rejected in {rejections} of 200");
}

#[test]
fn mc_writes_versioned_outputs_and_monotone_power() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.toml",
        "replications = 400\nsample_sizes = [25]\nestimators = [\"did\"]\ntests = [\"id.did\"]\n\
         [dgp]\npreset = \"idTest-I\"\n[power]\nkind = \"intensity\"\ngrid = [0.0, 0.25, 0.5, 0.75, 1.0]\n",
    );
    let out = dir.path().join("out");
    let o = tdid(&["mc", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["estimators.csv", "tests.csv", "report.json", "power.csv", "power.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let power: Value = serde_json::from_str(&std::fs::read_to_string(out.join("power.json")).unwrap()).unwrap();
    let rates: Vec<f64> = power["points"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["test"] == "id.did" && p["level"] == 0.05)
        .map(|p| p["rate"].as_f64().unwrap())
        .collect();
    assert_eq!(rates.len(), 5);
    assert!(rates.windows(2).all(|w| w[1] >= w[0] - 0.01), "{rates:?}");
}

#[test]
fn mc_prints_reference_comparison_for_named_design() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = tdid(&["mc", "--preset", "sc-ba", "--reps", "300", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("reference SC-BA n=100 tdid"), "{}", stdout(&o));
}

#[test]
fn mc_config_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.toml", "estimators = []\n[dgp]\npreset = \"sc-ba\"\n");
    let o = tdid(&["mc", &empty, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("estimator set is empty"));
    let unknown = write(dir.path(), "u.toml", "[dgp]\npreset = \"nope\"\n");
    let o = tdid(&["mc", &unknown, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fixture_replay_builds_the_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wb.csv");
    let o = tdid(&[
        "fetch-worldbank",
        "--countries",
        "BEN,TGO",
        "--years",
        "1960:2018",
        "--out",
        out.to_str().unwrap(),
        "--fixture",
        fixture_dir().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = PanelFile::read_path(&out).unwrap();
    assert_eq!(f.periods.len(), 59);
    assert_eq!(f.labels, vec!["BEN", "TGO"]);
    assert_eq!((f.periods[0], f.periods[58]), (1960, 2018));
}

#[test]
fn unknown_country_reports_the_api_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdid(&[
        "fetch-worldbank",
        "--countries",
        "XXX",
        "--years",
        "1960:2018",
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
        "--fixture",
        fixture_dir().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("The provided parameter value is not valid"));
}

#[test]
fn eigscan_emits_positive_minimum_eigenvalues() {
    let o = tdid(&["eigscan", "--points", "50"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,mineig_qa,mineig_qb,mineig_q"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r[1..].iter().all(|&v| v > 0.0)));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    assert_eq!(tdid(&["estimate"]).status.code(), Some(1));
    assert_eq!(tdid(&["--help"]).status.code(), Some(0));
}
