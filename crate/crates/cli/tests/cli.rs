//! Runs the `grafcet-lint` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(format!("{name}.grafcet.json"))
        .to_string_lossy()
        .into_owned()
}

fn lint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grafcet-lint")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("grafcet-lint-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn g_rit_is_clean() {
    let o = lint(&["analyze", &corpus("g_rit")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("G_RIT: 13/13 steps reachable"), "{text}");
    assert!(text.contains("no findings"));
    assert!(text.contains("timings: validate"));
}

#[test]
fn fig5_json_dump() {
    let o = lint(&["analyze", "--format", "json", "--dump-invariants", &corpus("fig5")]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["partials"][0]["invariants"]["s_invariants"][0]["vector"], serde_json::json!([2, 2, 1, 1, 1]));
    assert_eq!(r["variables"]["k"], serde_json::json!({"lo": 0, "hi": 4}));
}

#[test]
fn missing_file_is_a_usage_error() {
    let o = lint(&["analyze", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn malformed_document_is_a_usage_error() {
    let path = temp_file("broken.grafcet.json", "{\"name\": ");
    let o = lint(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(lint(&["analyze", "--bogus", &corpus("fig1")]).status.code(), Some(2));
    assert_eq!(lint(&[]).status.code(), Some(2));
}

#[test]
fn findings_set_the_exit_code() {
    assert_eq!(lint(&["analyze", &corpus("fig2_g2")]).status.code(), Some(1));
    assert_eq!(lint(&["analyze", "--fail-on", "error", &corpus("fig2_g2")]).status.code(), Some(1));
}

#[test]
fn fail_on_error_tolerates_warnings() {
    let path = temp_file(
        "warn.grafcet.json",
        r#"{"name": "warn", "variables": [],
          "partials": [{"id": "G", "steps": [{"id": "1", "initial": true}, {"id": "2"}]}]}"#,
    );
    let path = path.to_str().unwrap();
    assert_eq!(lint(&["analyze", path]).status.code(), Some(1));
    assert_eq!(lint(&["analyze", "--fail-on", "error", path]).status.code(), Some(0));
}

#[test]
fn naive_mode_raises_the_false_alarm() {
    let o = lint(&["analyze", "--naive", &corpus("g_rit")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("(value sets)"));
}

#[test]
fn reports_without_timings_are_reproducible() {
    let args = ["analyze", "--format", "json", "--dump-invariants", "--no-timings", "--jobs", "2"];
    let run = |name: &str| {
        let mut a = args.to_vec();
        let path = corpus(name);
        a.push(&path);
        lint(&a).stdout
    };
    for name in ["g_rit", "fig2_g6"] {
        assert_eq!(run(name), run(name), "{name}");
    }
}

#[test]
fn sidecar_queries() {
    let q = temp_file(
        "q.json",
        r#"{"queries": [{"kind": "never-concurrent", "name": "split", "a": "G6.2", "b": "G6.3"}]}"#,
    );
    let o = lint(&["analyze", "--fail-on", "error", "--queries", q.to_str().unwrap(), &corpus("fig2_g6")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("query split"));
}

#[test]
fn oracle_cross_check() {
    let o = lint(&["analyze", "--oracle", &corpus("fig4")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 discrepancies"));
}
