use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use liact::{run_document, run_scenario, RunOptions, Scenario};
use serde_json::Value;

const SHIPPED: [&str; 11] = [
    "example1",
    "example2",
    "example3",
    "example4",
    "example4_rational",
    "example4_integer",
    "example5",
    "affine",
    "heisenberg",
    "sl2_incomplete",
    "supertranslation",
];

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn source(name: &str) -> String {
    fs::read_to_string(scenario_path(name)).unwrap()
}

fn liact(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liact"))
        .arg("run")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.report.json"))).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, contents).unwrap();
    p
}

#[test]
fn binary_runs_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = liact(&scenario_path("example5"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "example5");
    assert_eq!(r["exit_code"], 0);
    let value = r["results"][1]["data"]["value"][0].as_f64().unwrap();
    assert!((value - 1.1).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("example5.report.json"));
}

#[test]
fn malformed_json_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let src = "{\"name\": \"broken\",\n \"algebra\": [1, 2,, 3]}";
    let p = write(dir.path(), "broken", src);
    let out = liact(&p, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "broken");
    assert_eq!(r["error"]["offset"].as_u64(), Some(src.find(",,").unwrap() as u64 + 1));
    assert!(r["error"].get("pointer").is_none());
}

#[test]
fn schema_error_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let src = source("example5").replace(r#""samples": 50"#, r#""samples": "many""#);
    let p = write(dir.path(), "bad_schema", &src);
    let out = liact(&p, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path(), "bad_schema");
    // task fields are located to the enclosing task
    assert_eq!(r["error"]["pointer"], "/tasks/2");
    assert!(String::from_utf8_lossy(&out.stderr).contains("/tasks/2"));

    let src = source("example5").replace(r#""even": ["x"]"#, r#""even": "x""#);
    let o = run_document(&src, "x", &RunOptions { out: dir.path().into(), ..Default::default() });
    assert_eq!(o.exit_code, 1);
    assert_eq!(o.report.error.unwrap().pointer.as_deref(), Some("/chart/even"));
}

#[test]
fn missing_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = liact(&dir.path().join("nowhere.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn obstruction_exits_three() {
    // a global act from the edge of the interval leaves the domain
    let src = source("example1").replace(
        r#"{"kind": "validate"},"#,
        r#"{"kind": "validate"}, {"kind": "act", "g": [2.0], "m": [0.5]},"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let o = run_document(&src, "x", &RunOptions { out: dir.path().into(), ..Default::default() });
    assert_eq!(o.exit_code, 3, "{}", o.report.to_json());
    assert_eq!(o.report.results[1].status, liact::Status::Obstruction);
}

#[test]
fn broken_representation_exits_two() {
    let src = source("heisenberg").replace(r#"["0", "1"]]"#, r#"["0", "2"]]"#);
    let dir = tempfile::tempdir().unwrap();
    let o = run_document(&src, "x", &RunOptions { out: dir.path().into(), ..Default::default() });
    assert_eq!(o.exit_code, 2);
    assert_eq!(o.report.results[0].kind, "validate");
    assert_eq!(o.report.results[0].status, liact::Status::Fail);
}

#[test]
fn shipped_scenarios_round_trip() {
    for name in SHIPPED {
        let s = Scenario::from_json(&source(name)).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s, "{name}");
    }
}

#[test]
fn shipped_scenarios_pass() {
    let dir = tempfile::tempdir().unwrap();
    for name in SHIPPED {
        let o = run_scenario(&scenario_path(name), &RunOptions { out: dir.path().into(), ..Default::default() });
        assert_eq!(o.exit_code, 0, "{name}: {}", o.report.to_json());
    }
    assert!(dir.path().join("supertranslation_leaf.csv").exists());
    assert!(dir.path().join("supertranslation_leaf.souls.json").exists());
}

#[test]
fn parallel_jobs_match_sequential() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for name in ["heisenberg", "affine"] {
        liact(&scenario_path(name), a.path(), &["--jobs", "1"]);
        liact(&scenario_path(name), b.path(), &["--jobs", "3"]);
        let file = format!("{name}.report.json");
        assert_eq!(fs::read(a.path().join(&file)).unwrap(), fs::read(b.path().join(&file)).unwrap(), "{name}");
    }
}

#[test]
fn seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = liact(&scenario_path("heisenberg"), dir.path(), &["--seed", "17"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "heisenberg");
    assert_eq!(r["seed"], 17);
    let first = fs::read(dir.path().join("heisenberg.report.json")).unwrap();
    liact(&scenario_path("heisenberg"), dir.path(), &["--seed", "18"]);
    assert_ne!(first, fs::read(dir.path().join("heisenberg.report.json")).unwrap());
}
