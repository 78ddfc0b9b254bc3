use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

fn lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lab"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("LAB_THREADS", t),
        None => cmd.env_remove("LAB_THREADS"),
    };
    cmd.output().expect("lab runs")
}

fn run_dir(out: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn write_config(dir: &Path, experiments: &str) -> PathBuf {
    let reference = fs::read_to_string(format!("{CONFIGS}/reference.toml")).unwrap();
    let text = reference
        .lines()
        .map(|l| {
            if l.starts_with("experiments") {
                format!("experiments = {experiments}")
            } else if l.starts_with("output_dir") {
                format!("output_dir = {:?}", dir.join("runs").display().to_string())
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join("lab.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn smoke_run_writes_eight_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let result = lab(
        &[
            "run",
            "--config",
            &format!("{CONFIGS}/smoke.toml"),
            "--out",
            out,
        ],
        None,
    );
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let dir = run_dir(&result);
    assert!(dir.starts_with(tmp.path()));
    assert_eq!(
        files(&dir),
        [
            "config.toml",
            "hc.csv",
            "hc.json",
            "measure.csv",
            "measure.json",
            "orbit.csv",
            "orbit.json",
            "summary.json"
        ]
    );
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("hc.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "harish_chandra");
    assert_eq!(report["config"]["orbit"]["max_dist"], 14.0);
    assert!(report["versions"]["cat1lab-core"].is_string());
    assert!(report["rows"].as_array().unwrap().len() > 4);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["experiments"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(dir.join("orbit.csv")).unwrap();
    assert!(csv.starts_with("n,count,") && !csv.contains('\r'));
}

#[test]
fn reruns_get_fresh_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let a = run_dir(&lab(&["orbit", "--out", out], None));
    let b = run_dir(&lab(&["orbit", "--out", out], None));
    assert_ne!(a, b);
    assert_eq!(
        fs::read(a.join("orbit.csv")).unwrap(),
        fs::read(b.join("orbit.csv")).unwrap()
    );
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.toml");
    let result = lab(&["run", "--config", missing.to_str().unwrap()], None);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("config error"));
}

#[test]
fn malformed_config_and_threads_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[group]\ndisks = [[0.0, 0.7], [0.4, 0.7]]\n").unwrap();
    assert_eq!(
        lab(&["run", "--config", path.to_str().unwrap()], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        lab(&["orbit", "--bins", "1000"], None).status.code(),
        Some(2)
    );
    assert_eq!(lab(&["orbit"], Some("zero")).status.code(), Some(2));
}

#[test]
fn deep_orbit_exceeds_the_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let result = lab(
        &[
            "orbit",
            "--max-dist",
            "30",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(result.status.code(), Some(3));
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn csv_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"["measure", "thm_d", "roblin"]"#);
    let config = config.to_str().unwrap();
    let one = run_dir(&lab(&["run", "--config", config], Some("1")));
    let eight = run_dir(&lab(&["run", "--config", config], Some("8")));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(eight.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["threads"], 8);
    let csvs: Vec<String> = files(&one)
        .into_iter()
        .filter(|f| f.ends_with(".csv"))
        .collect();
    assert_eq!(csvs.len(), 4);
    for f in csvs {
        assert_eq!(
            fs::read(one.join(&f)).unwrap(),
            fs::read(eight.join(&f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn checks_pass_on_the_reference_group() {
    let tmp = tempfile::tempdir().unwrap();
    let result = lab(&["checks", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let csv = fs::read_to_string(run_dir(&result).join("checks.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}
