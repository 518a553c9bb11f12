//! End-to-end runs over the corpus.

mod common;

use common::corpus;
use grafcet_core::finding::{FindingKind, Severity};
use grafcet_core::ingest::{parse_queries, parse_spec_unchecked};
use grafcet_core::oracle::OracleConfig;
use grafcet_core::pipeline::{analyze, oracle_check, report_json, report_text, Options, ReportOptions, REPORT_SCHEMA};
use serde_json::json;

const CORPUS: &[&str] = &[
    "fig1",
    "fig2_g1",
    "fig2_g2",
    "fig2_g3",
    "fig2_g4",
    "fig2_g5",
    "fig2_g6",
    "fig2_g7_g8",
    "fig4",
    "fig5",
    "g_rit",
];

fn kinds(name: &str) -> Vec<(FindingKind, Severity)> {
    analyze(&corpus(name), &Options::default())
        .findings
        .iter()
        .map(|f| (f.kind, f.severity))
        .collect()
}

#[test]
fn whole_corpus_completes() {
    for name in CORPUS {
        let a = analyze(&corpus(name), &Options::default());
        assert!(a.complete, "{name}: {:?}", a.findings);
    }
}

#[test]
fn clean_fixtures_have_no_findings() {
    for name in ["fig1", "fig4", "fig5", "g_rit"] {
        assert_eq!(kinds(name), vec![], "{name}");
    }
}

#[test]
fn concurrent_structures_race_on_x() {
    for name in ["fig2_g1", "fig2_g2", "fig2_g3", "fig2_g4", "fig2_g5", "fig2_g6", "fig2_g7_g8"] {
        let a = analyze(&corpus(name), &Options::default());
        let races: Vec<_> = a.findings_of(FindingKind::Race).collect();
        assert_eq!(races.len(), 1, "{name}: {:?}", a.findings);
        assert_eq!(races[0].severity, Severity::Error);
        assert_eq!(races[0].evidence["variable"], json!("x"));
    }
}

#[test]
fn uncovered_steps_warn_about_unbounded_activation() {
    for (name, count) in [("fig2_g4", 2), ("fig2_g5", 2), ("fig2_g6", 0)] {
        let n = kinds(name).iter().filter(|(k, _)| *k == FindingKind::UnboundedActivation).count();
        assert_eq!(n, count, "{name}");
    }
}

#[test]
fn oracle_agrees_with_every_fixture() {
    for name in CORPUS {
        let a = analyze(&corpus(name), &Options::default());
        let o = oracle_check(&a, &OracleConfig::default());
        assert!(o.discrepancies.is_empty(), "{name}: {:?}", o.discrepancies);
        assert!(!o.inconclusive, "{name}: state cap hit");
    }
}

#[test]
fn cyclic_hierarchy_stops_early() {
    let spec = parse_spec_unchecked(
        r#"{"name": "cycle", "variables": [],
          "partials": [
            {"id": "A", "steps": [{"id": "1", "initial": true}, {"id": "2", "marked": true}],
             "enclosings": [{"step": "1", "target": "B"}]},
            {"id": "B", "steps": [{"id": "3", "marked": true}],
             "enclosings": [{"step": "3", "target": "A"}]}]}"#,
    )
    .unwrap();
    let a = analyze(&spec, &Options::default());
    assert!(!a.complete);
    let cycle: Vec<_> = a.findings_of(FindingKind::HierarchyCycle).collect();
    assert_eq!(cycle.len(), 1);
    assert!(cycle[0].message.contains("A -> B -> A"), "{}", cycle[0].message);
    let report = report_json(&a, ReportOptions::default(), None);
    assert_eq!(report["complete"], json!(false));
    assert!(report.get("partials").is_none());
}

#[test]
fn invalid_model_stops_before_analysis() {
    let spec = parse_spec_unchecked(
        r#"{"name": "bad", "variables": [],
          "partials": [{"id": "A", "steps": [{"id": "1", "initial": true}],
            "transitions": [{"id": "t", "from": ["1"], "to": ["9"]}]}]}"#,
    )
    .unwrap();
    let a = analyze(&spec, &Options::default());
    assert!(!a.complete);
    assert!(a.findings.iter().all(|f| f.kind == FindingKind::InvalidModel));
    assert_eq!(a.max_severity(), Some(Severity::Error));
}

#[test]
fn json_report_carries_invariants_and_intervals() {
    let a = analyze(&corpus("fig5"), &Options::default());
    let r = report_json(&a, ReportOptions { dump_invariants: true, timings: false }, None);
    assert_eq!(r["schema"], json!(REPORT_SCHEMA));
    assert_eq!(r["spec"]["name"], json!("fig5"));
    assert_eq!(r["spec"]["digest"].as_str().unwrap().len(), 64);
    let inv = &r["partials"][0]["invariants"];
    assert_eq!(inv["s_invariants"][0]["vector"], json!([2, 2, 1, 1, 1]));
    assert_eq!(inv["n"], json!(2));
    assert_eq!(inv["t_invariants"], json!([]));
    assert_eq!(r["variables"]["k"], json!({"lo": 0, "hi": 4}));
    assert_eq!(r["execution_bounds"][0]["count"], json!(4));
    assert!(r.get("timings_ms").is_none());
    let timed = report_json(&a, ReportOptions::default(), None);
    assert!(timed["timings_ms"]["reachconc"].is_number());
}

#[test]
fn unbounded_counts_serialize_as_inf() {
    let a = analyze(&corpus("fig2_g5"), &Options::default());
    let r = report_json(&a, ReportOptions { dump_invariants: false, timings: false }, None);
    assert_eq!(r["partials"][0]["invariants"]["n"], json!("inf"));
    assert_eq!(r["variables"]["x"], json!({"lo": 0, "hi": "+inf"}));
}

#[test]
fn text_report_lists_variables_and_findings() {
    let a = analyze(&corpus("fig5"), &Options::default());
    let text = report_text(&a, ReportOptions { dump_invariants: true, timings: false }, None);
    assert!(text.contains("k: [0, 4]"), "{text}");
    assert!(text.contains("S-invariant [2,2,1,1,1]"), "{text}");
    assert!(text.contains("no findings"));
    let a = analyze(&corpus("fig2_g2"), &Options::default());
    let text = report_text(&a, ReportOptions::default(), None);
    assert!(text.contains("error[race]"), "{text}");
    assert!(text.contains("timings:"));
}

#[test]
fn sidecar_queries_are_checked() {
    let queries = parse_queries(
        r#"{"queries": [
            {"kind": "never-concurrent", "name": "split", "a": "G6.2", "b": "G6.3"},
            {"kind": "never-concurrent", "name": "sequence", "a": "G6.1", "b": "G6.2"}]}"#,
    )
    .unwrap();
    let a = analyze(&corpus("fig2_g6"), &Options { extra_queries: queries, ..Options::default() });
    let violated: Vec<_> = a.findings_of(FindingKind::QueryViolation).map(|f| f.location.to_string()).collect();
    assert_eq!(violated, vec!["query split".to_owned()]);
}

#[test]
fn report_fields_are_documented() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(schema["properties"]["schema"]["const"], json!(REPORT_SCHEMA));
    let a = analyze(&corpus("fig5"), &Options::default());
    let o = oracle_check(&a, &OracleConfig::default());
    let r = report_json(&a, ReportOptions { dump_invariants: true, timings: true }, Some(&o));
    for key in r.as_object().unwrap().keys() {
        assert!(schema["properties"].get(key).is_some(), "undocumented field {key}");
    }
    for key in schema["required"].as_array().unwrap() {
        assert!(r.get(key.as_str().unwrap()).is_some(), "missing field {key}");
    }
    let partial_fields = &schema["$defs"]["partial"]["properties"]["invariants"]["properties"];
    for key in r["partials"][0]["invariants"].as_object().unwrap().keys() {
        assert!(partial_fields.get(key).is_some(), "undocumented invariant field {key}");
    }
}
