use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sleigh_cli::config::{self, DEFAULT_CONFIG};
use sleigh_cli::output::TRAJECTORY_COLUMNS;
use sleigh_core::{reference_scenarios, ControllerParams, IntegratorConfig, ModelParams};

fn sleigh(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sleigh"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

/// Four-second horizon with the decay thresholds relaxed to match.
const SHORT: [&str; 6] = [
    "--override",
    "integrator.t_final=4",
    "--override",
    "checks.q_decay_max=10",
    "--override",
    "checks.hd_decay_max=1",
];

fn short(args: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    v.extend(SHORT.iter().map(|s| s.to_string()));
    v
}

fn sleigh_short(args: &[&str], out: &Path) -> Output {
    let v = short(args);
    sleigh(&v.iter().map(String::as_str).collect::<Vec<_>>(), out)
}

#[test]
fn shipped_config_matches_reference_setup() {
    let (_, cfg) = config::load(None, &[]).unwrap();
    assert_eq!(cfg.model, ModelParams::reference());
    assert_eq!(cfg.controller, ControllerParams::reference());
    assert_eq!(cfg.integrator, IntegratorConfig::default());
    assert_eq!(cfg.seed, 0);
    let expected = reference_scenarios();
    assert_eq!(cfg.scenarios(), expected);
}

#[test]
fn default_run_passes_and_writes_one_csv_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleigh(&["simulate"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["passed"], true);
    let scenarios = s["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 4);
    for sc in scenarios {
        let file = dir.path().join(sc["trajectory_file"].as_str().unwrap());
        let text = fs::read_to_string(file).unwrap();
        assert_eq!(text.lines().count(), 5002);
        assert!(sc["convergence_metrics"]["q_decay_ratio"].as_f64().unwrap() <= 0.05);
    }
}

#[test]
fn csv_header_and_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleigh_short(&["simulate"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(dir.path().join("s1_m3_m2_pi8.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, TRAJECTORY_COLUMNS);
    let first = reader.records().next().unwrap().unwrap();
    assert_eq!(&first[3], "3.9269908169872414e-1");
    for field in first.iter() {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = sleigh_short(&["simulate", "--seed", "7", "--jobs", "1"], dir.path());
    let first: Vec<(String, Vec<u8>)> = read_all(dir.path());
    let b = sleigh_short(&["simulate", "--seed", "7", "--jobs", "4"], dir.path());
    let second = read_all(dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(first, second);
    assert_eq!(first.len(), 5);

    let v1 = tempfile::tempdir().unwrap();
    let v2 = tempfile::tempdir().unwrap();
    sleigh(&["verify", "--jobs", "1", "--override", "output.directory=x"], v1.path());
    sleigh(&["verify", "--jobs", "3", "--override", "output.directory=x"], v2.path());
    let (j1, j2) = (summary(v1.path()), summary(v2.path()));
    assert_eq!(j1["reports"], j2["reports"]);
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn override_reaches_the_controller() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleigh_short(&["simulate", "--override", "controller.k=0.2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(dir.path())["config"]["controller"]["k"], 0.2);
}

#[test]
fn singular_start_is_recorded_and_others_still_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleigh_short(&["simulate", "--override", "scenarios.2.state.2=0.0"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let s = summary(dir.path());
    let scenarios = s["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 4);
    assert_eq!(scenarios[2]["error"]["kind"], "InitialSingularity");
    assert!(scenarios[2].get("trajectory_file").is_none());
    for i in [0, 1, 3] {
        assert!(scenarios[i]["error"].is_null());
        assert!(dir.path().join(scenarios[i]["trajectory_file"].as_str().unwrap()).exists());
    }
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // Four seconds is far too short to reach the default decay threshold.
    let out = sleigh(&["simulate", "--override", "integrator.t_final=4"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(dir.path())["passed"], false);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["simulate", "--override", "model.mass=-1"],
        &["simulate", "--override", "model.colour=1"],
        &["simulate", "--override", "no_equals_sign"],
        &["simulate", "--override", "scenarios.9.state.0=1"],
        &["simulate", "--override", "controller.d_hat=[[1.0, 2.0], [2.0, 1.0]]"],
        &["simulate", "--config", "/definitely/not/here.toml"],
        &["sweep", "--param", "controller.k", "--values", "0.1,-1"],
        &["simulate", "--jobs", "0"],
    ];
    for args in cases {
        let out = sleigh(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = sleigh(&["simulate", "--override", "model.mass=-1"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.mass"));
}

#[test]
fn empty_scenario_list_is_rejected() {
    let text = DEFAULT_CONFIG
        .split("\n[[scenarios]]")
        .next()
        .unwrap()
        .to_string();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("none.toml");
    fs::write(&path, text).unwrap();
    let err = config::load(Some(&path), &[]).unwrap_err();
    assert!(err.to_string().contains("scenarios"), "{err}");
}

#[test]
fn verify_writes_reports_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleigh(&["verify", "--override", "checks.residual_samples=1000"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path());
    let names: Vec<&str> = s["reports"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 7);
    assert!(names.contains(&"closed_loop_matching"));
    assert!(s.get("scenarios").is_none());
    assert_eq!(read_all(dir.path()).len(), 1);
}

#[test]
fn sweep_emits_metrics_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleigh_short(&["sweep", "--param", "model.offset", "--values", "0,0.5,1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(&reader.headers().unwrap()[0], "model.offset");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(&rows[0][0], "0");
    assert_eq!(&rows[11][0], "1");
    assert!(rows.iter().all(|r| &r[2] == "ok"));
}
