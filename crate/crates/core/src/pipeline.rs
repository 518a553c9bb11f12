//! End-to-end analysis of a specification and the versioned report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::checks::{self, AbstractEnv};
use crate::finding::{max_severity, sort_findings, Element, Finding, FindingKind, Severity};
use crate::hierarchy::{self, describe_source, HierarchyGraph, InitialSituation};
use crate::invariants::{self, InvariantSet, DEFAULT_ROW_CAP};
use crate::model::{validate, GlobalStep, GrafcetSpec, SafetyQuery, Topology};
use crate::oracle::{self, OracleConfig, OracleFacts};
use crate::reachconc::{self, GlobalConcurrency, ReachConcResult};
use crate::varapprox::{self, BoundInputs, ExecutionBounds, VarApprox};

pub const REPORT_SCHEMA: &str = "grafcet-lint/report/v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Options {
    /// Judge `never-coactive` queries from value sets only.
    pub naive: bool,
    /// Worker threads; 0 uses the number of logical cores.
    pub jobs: usize,
    /// Farkas row limit.
    pub row_cap: usize,
    /// Queries evaluated in addition to those inside the spec.
    pub extra_queries: Vec<SafetyQuery>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            naive: false,
            jobs: 0,
            row_cap: DEFAULT_ROW_CAP,
            extra_queries: Vec::new(),
        }
    }
}

/// Every intermediate result of one run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub spec: GrafcetSpec,
    pub findings: Vec<Finding>,
    pub graph: Option<HierarchyGraph>,
    pub situations: Vec<Vec<InitialSituation>>,
    pub topologies: Vec<Topology>,
    pub results: Vec<Vec<ReachConcResult>>,
    pub invariants: Vec<InvariantSet>,
    pub global: GlobalConcurrency,
    pub bounds: ExecutionBounds,
    pub variables: BTreeMap<String, VarApprox>,
    pub timings: Vec<(&'static str, Duration)>,
    /// False when the run stopped early (invalid model or cyclic hierarchy).
    pub complete: bool,
}

impl Analysis {
    pub fn partial_index(&self, id: &str) -> Option<usize> {
        self.spec.partial_position(id)
    }

    pub fn step(&self, partial: &str, step: &str) -> Option<GlobalStep> {
        let p = self.spec.partial_position(partial)?;
        Some(GlobalStep::new(p, self.spec.partials[p].step_position(step)?))
    }

    pub fn max_severity(&self) -> Option<Severity> {
        max_severity(&self.findings)
    }

    pub fn findings_of(&self, kind: FindingKind) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(move |f| f.kind == kind)
    }
}

fn timed<T>(timings: &mut Vec<(&'static str, Duration)>, phase: &'static str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.push((phase, start.elapsed()));
    out
}

fn empty(spec: &GrafcetSpec, findings: Vec<Finding>, timings: Vec<(&'static str, Duration)>) -> Analysis {
    Analysis {
        spec: spec.clone(),
        findings,
        graph: None,
        situations: Vec::new(),
        topologies: Vec::new(),
        results: Vec::new(),
        invariants: Vec::new(),
        global: GlobalConcurrency::default(),
        bounds: ExecutionBounds::default(),
        variables: BTreeMap::new(),
        timings,
        complete: false,
    }
}

/// Runs validation, hierarchy, reachability/concurrency, invariants,
/// variable approximation and all checks.
pub fn analyze(spec: &GrafcetSpec, options: &Options) -> Analysis {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(options.jobs).build();
    match pool {
        Ok(pool) => pool.install(|| run(spec, options)),
        Err(_) => run(spec, options),
    }
}

fn run(spec: &GrafcetSpec, options: &Options) -> Analysis {
    let mut timings = Vec::new();
    let mut findings = timed(&mut timings, "validate", || validate(spec));
    if findings.iter().any(|f| f.severity == Severity::Error) {
        return empty(spec, findings, timings);
    }

    let (graph, cycle) = timed(&mut timings, "hierarchy", || hierarchy::build_hierarchy(spec));
    let Some(order) = graph.topological_order().filter(|_| cycle.is_empty()) else {
        findings.extend(cycle);
        let mut a = empty(spec, findings, timings);
        a.graph = Some(graph);
        return a;
    };
    let situations: Vec<Vec<InitialSituation>> =
        (0..spec.partials.len()).map(|p| hierarchy::initial_situations(spec, &graph, p)).collect();
    findings.extend(hierarchy::dead_partials(spec, &situations));

    let topologies: Vec<Topology> = spec.partials.iter().map(|p| p.topology()).collect();
    let results: Vec<Vec<ReachConcResult>> = timed(&mut timings, "reachconc", || {
        situations
            .par_iter()
            .enumerate()
            .map(|(p, sits)| sits.iter().map(|s| reachconc::reach_analysis(&topologies[p], s)).collect())
            .collect()
    });
    let invariants: Vec<InvariantSet> = timed(&mut timings, "invariants", || {
        topologies.par_iter().map(|t| invariants::analyze(t, options.row_cap)).collect()
    });
    let global = timed(&mut timings, "lift", || reachconc::lift_hierarchy_concurrency(spec, &topologies, &results));

    let (bounds, variables) = timed(&mut timings, "varapprox", || {
        let bounds = varapprox::bound_executions(&BoundInputs {
            spec,
            topologies: &topologies,
            invariants: &invariants,
            results: &results,
            global: &global,
            order: &order,
        });
        let variables = varapprox::approximate_variables(spec, &bounds);
        (bounds, variables)
    });

    timed(&mut timings, "checks", || {
        findings.extend(checks::unreachable_steps(spec, &global));
        findings.extend(checks::unbounded_activations(spec, &invariants, &global));
        findings.extend(checks::detect_races(spec, &global));
        findings.extend(checks::check_conditions(&AbstractEnv {
            spec,
            approx: &variables,
            global: &global,
        }));
        let queries: Vec<SafetyQuery> = spec.queries.iter().chain(&options.extra_queries).cloned().collect();
        findings.extend(checks::run_queries(spec, &queries, &global, &variables, options.naive));
    });
    sort_findings(&mut findings);

    Analysis {
        spec: spec.clone(),
        findings,
        graph: Some(graph),
        situations,
        topologies,
        results,
        invariants,
        global,
        bounds,
        variables,
        timings,
        complete: true,
    }
}

/// SHA-256 of the canonical serialization.
pub fn spec_digest(spec: &GrafcetSpec) -> String {
    hex::encode(Sha256::digest(crate::ingest::to_json(spec).as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub dump_invariants: bool,
    pub timings: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            dump_invariants: false,
            timings: true,
        }
    }
}

fn vector(v: &[BigInt]) -> Value {
    Value::Array(
        v.iter()
            .map(|x| match u64::try_from(x) {
                Ok(n) => json!(n),
                Err(_) => json!(x.to_string()),
            })
            .collect(),
    )
}

fn named(v: &[BigInt], names: &[String]) -> Value {
    let map: serde_json::Map<String, Value> = v
        .iter()
        .zip(names)
        .filter(|(x, _)| !x.is_zero())
        .map(|(x, n)| (n.clone(), vector(std::slice::from_ref(x))[0].clone()))
        .collect();
    Value::Object(map)
}

/// The JSON report.
pub fn report_json(a: &Analysis, opts: ReportOptions, oracle: Option<&OracleSummary>) -> Value {
    let spec = &a.spec;
    let counts = |s: Severity| a.findings.iter().filter(|f| f.severity == s).count();
    let mut report = json!({
        "schema": REPORT_SCHEMA,
        "tool": {"name": "grafcet-lint", "version": env!("CARGO_PKG_VERSION")},
        "spec": {"name": spec.name, "digest": spec_digest(spec)},
        "complete": a.complete,
        "summary": {
            "errors": counts(Severity::Error),
            "warnings": counts(Severity::Warning),
            "infos": counts(Severity::Info),
        },
        "findings": a.findings,
    });
    if a.complete {
        let mut partials = Vec::new();
        for (p, pg) in spec.partials.iter().enumerate() {
            let step_names: Vec<String> = pg.steps.iter().map(|s| s.id.clone()).collect();
            let names = |v: &[usize]| -> Vec<String> { v.iter().map(|&s| step_names[s].clone()).collect() };
            let situations: Vec<Value> = a.results[p]
                .iter()
                .zip(&a.global.live[p])
                .map(|(r, live)| {
                    let conc: serde_json::Map<String, Value> = r
                        .concurrency
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !c.is_empty())
                        .map(|(s, c)| (step_names[s].clone(), json!(names(c))))
                        .collect();
                    json!({
                        "source": describe_source(spec, &r.situation.source),
                        "live": live,
                        "initial": names(&r.situation.steps),
                        "reachable": names(&r.reachable),
                        "concurrency": conc,
                        "self_concurrent": names(&r.self_concurrent),
                        "iterations": r.iterations,
                    })
                })
                .collect();
            let reachable: Vec<usize> = (0..pg.steps.len()).filter(|&s| a.global.reachable[p][s]).collect();
            let inv = &a.invariants[p];
            let b = &inv.boundedness;
            let per_step: serde_json::Map<String, Value> =
                b.per_step.iter().enumerate().map(|(s, c)| (step_names[s].clone(), json!(c))).collect();
            let mut inv_json = json!({
                "covered": b.covered,
                "n": b.n,
                "per_step": per_step,
                "uncovered": names(&b.uncovered),
                "s_invariant_count": inv.s_invariants.len(),
                "t_invariant_count": inv.t_invariants.len(),
                "incomplete": inv.incomplete.map(|e| e.to_string()),
            });
            if opts.dump_invariants {
                let tnames: Vec<String> = pg.transitions.iter().map(|t| t.id.clone()).collect();
                inv_json["steps"] = json!(step_names);
                inv_json["transitions"] = json!(tnames);
                inv_json["matrix"] = json!(inv.matrix.entries);
                inv_json["s_invariants"] = Value::Array(
                    inv.s_invariants
                        .iter()
                        .map(|y| json!({"vector": vector(y), "named": named(y, &step_names)}))
                        .collect(),
                );
                inv_json["t_invariants"] = Value::Array(
                    inv.t_invariants
                        .iter()
                        .map(|x| json!({"vector": vector(x), "named": named(x, &tnames)}))
                        .collect(),
                );
            }
            partials.push(json!({
                "id": pg.id,
                "reachable": names(&reachable),
                "reentrant": a.global.reentrant[p],
                "situations": situations,
                "invariants": inv_json,
            }));
        }
        report["partials"] = Value::Array(partials);
        report["concurrency"] = Value::Array(
            a.global
                .pairs
                .iter()
                .map(|&(x, y)| json!([spec.step_name(x), spec.step_name(y)]))
                .collect(),
        );
        let bounds: Vec<Value> = spec
            .partials
            .iter()
            .enumerate()
            .flat_map(|(p, pg)| {
                pg.actions.iter().enumerate().map(move |(i, act)| {
                    let b = a.bounds.action(p, i);
                    json!({
                        "action": b.action,
                        "step": format!("{}.{}", pg.id, act.step()),
                        "count": b.count,
                        "reasons": b.reasons,
                    })
                })
            })
            .collect();
        report["execution_bounds"] = Value::Array(bounds);
        report["variables"] = json!(a.variables);
    }
    if let Some(o) = oracle {
        report["oracle"] = json!(o);
    }
    if opts.timings {
        let t: serde_json::Map<String, Value> = a
            .timings
            .iter()
            .map(|(k, d)| (k.to_string(), json!(d.as_secs_f64() * 1000.0)))
            .collect();
        report["timings_ms"] = Value::Object(t);
    }
    report
}

/// Human-readable report.
pub fn report_text(a: &Analysis, opts: ReportOptions, oracle: Option<&OracleSummary>) -> String {
    let spec = &a.spec;
    let mut out = String::new();
    let _ = writeln!(out, "{} ({})", spec.name, &spec_digest(spec)[..12]);
    if a.complete {
        for (p, pg) in spec.partials.iter().enumerate() {
            let reach = a.global.reachable[p].iter().filter(|&&r| r).count();
            let b = &a.invariants[p].boundedness;
            let _ = writeln!(
                out,
                "  {}: {}/{} steps reachable, {} situation(s), n = {}{}",
                pg.id,
                reach,
                pg.steps.len(),
                a.situations[p].len(),
                b.n,
                if b.covered { "" } else { " (not covered by S-invariants)" }
            );
            if opts.dump_invariants {
                let inv = &a.invariants[p];
                let steps: Vec<&str> = pg.steps.iter().map(|s| s.id.as_str()).collect();
                let _ = writeln!(out, "    steps {steps:?}");
                for y in &inv.s_invariants {
                    let _ = writeln!(out, "    S-invariant {}", vector(y));
                }
                for x in &inv.t_invariants {
                    let _ = writeln!(out, "    T-invariant {}", vector(x));
                }
            }
        }
        if !a.variables.is_empty() {
            let _ = writeln!(out, "variables:");
            for (v, approx) in &a.variables {
                let _ = writeln!(out, "  {v}: {approx}");
            }
        }
    }
    if a.findings.is_empty() {
        let _ = writeln!(out, "no findings");
    } else {
        let _ = writeln!(out, "findings:");
        for f in &a.findings {
            let _ = writeln!(out, "  {f}");
        }
    }
    let counts = |s: Severity| a.findings.iter().filter(|f| f.severity == s).count();
    let _ = writeln!(
        out,
        "{} error(s), {} warning(s), {} info",
        counts(Severity::Error),
        counts(Severity::Warning),
        counts(Severity::Info)
    );
    if let Some(o) = oracle {
        let _ = writeln!(
            out,
            "oracle: {} states{}, {} discrepancies",
            o.states,
            if o.inconclusive { " (cap hit)" } else { "" },
            o.discrepancies.len()
        );
        for d in &o.discrepancies {
            let _ = writeln!(out, "  {d}");
        }
    }
    if opts.timings {
        let parts: Vec<String> = a
            .timings
            .iter()
            .map(|(k, d)| format!("{k} {:.3} ms", d.as_secs_f64() * 1000.0))
            .collect();
        let _ = writeln!(out, "timings: {}", parts.join(", "));
    }
    out
}

/// Result of comparing an explicit-state exploration with the analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleSummary {
    pub states: usize,
    pub inconclusive: bool,
    /// Observed facts that the analysis does not cover.
    pub discrepancies: Vec<String>,
}

/// Observed behaviour not covered by the analysis. Empty for a sound
/// analysis.
pub fn discrepancies(a: &Analysis, facts: &OracleFacts) -> Vec<String> {
    let spec = &a.spec;
    let mut out = Vec::new();
    if !a.complete {
        return out;
    }
    for &g in &facts.reachable {
        if !a.global.is_reachable(g) {
            out.push(format!("step {} reached but not in S^R", spec.step_name(g)));
        }
    }
    for &g in &facts.multiple {
        if !a.global.concurrent(g, g) {
            out.push(format!("step {} held two tokens but is not self-concurrent", spec.step_name(g)));
        }
    }
    for &(x, y) in &facts.concurrent {
        if !a.global.concurrent(x, y) {
            out.push(format!("{} and {} active together but not concurrent", spec.step_name(x), spec.step_name(y)));
        }
    }
    for (v, values) in &facts.values {
        if let Some(approx) = a.variables.get(v) {
            for &x in values {
                if !approx.contains(x) {
                    out.push(format!("`{v}` = {x} observed outside {approx}"));
                }
            }
        }
    }
    let races: Vec<(&str, &str)> = a
        .findings_of(FindingKind::Race)
        .filter_map(|f| match (&f.location.element, &f.location.related) {
            (Some(Element::Action(x)), Some(Element::Action(y))) => Some((x.as_str(), y.as_str())),
            _ => None,
        })
        .collect();
    for (x, y) in &facts.conflicts {
        if !races.iter().any(|&(p, q)| (p == x && q == y) || (p == y && q == x)) {
            out.push(format!("actions {x} and {y} wrote together but no race was reported"));
        }
    }
    out
}

/// Explores the spec in structural mode and compares.
pub fn oracle_check(a: &Analysis, config: &OracleConfig) -> OracleSummary {
    let facts = oracle::explore(&a.spec, config);
    OracleSummary {
        states: facts.states,
        inconclusive: facts.inconclusive,
        discrepancies: discrepancies(a, &facts),
    }
}
