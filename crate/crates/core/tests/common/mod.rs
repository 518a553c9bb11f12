//! Shared fixtures: corpus loading and random specification generation.

#![allow(dead_code)]

use std::path::PathBuf;

use grafcet_core::ingest::parse_spec;
use grafcet_core::model::GrafcetSpec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.grafcet.json"))
}

pub fn corpus(name: &str) -> GrafcetSpec {
    let path = corpus_path(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_spec(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Size limits for [`random_spec`].
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_steps: usize,
    pub max_transitions: usize,
    pub max_partials: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: 8,
            max_transitions: 8,
            max_partials: 2,
        }
    }
}

const CONDITIONS: &[&str] = &["u", "!u", "v", "u & v", "re(u)", "x > 1", "x <= 0", "f", "!f | v"];
const VALUES: &[&str] = &["0", "x + 1", "x - 1", "x + 2", "3", "2 * x"];

fn subset<R: Rng>(rng: &mut R, n: usize, min: usize, max: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let k = rng.gen_range(min..=max.min(n));
    let mut v = all[..k].to_vec();
    v.sort_unstable();
    v
}

fn names(prefix: &str, idx: &[usize]) -> Value {
    json!(idx.iter().map(|i| format!("{prefix}{i}")).collect::<Vec<_>>())
}

/// A random valid specification with up to `limits.max_partials` partial
/// Grafcets and, in total, up to `max_steps` steps and `max_transitions`
/// transitions. Covers source transitions, parallel splits and joins,
/// enclosing, forcing, stored and continuous actions.
pub fn random_spec<R: Rng>(rng: &mut R, limits: Limits) -> GrafcetSpec {
    loop {
        if let Some(spec) = try_random_spec(rng, limits) {
            return spec;
        }
    }
}

fn try_random_spec<R: Rng>(rng: &mut R, limits: Limits) -> Option<GrafcetSpec> {
    let partials = rng.gen_range(1..=limits.max_partials);
    let mut step_budget = limits.max_steps;
    let mut trans_budget = limits.max_transitions;
    let mut sizes = Vec::new();
    for p in 0..partials {
        let left = partials - p - 1;
        let n = rng.gen_range(1..=(step_budget - left).min(6));
        let t = rng.gen_range(0..=trans_budget.min(n + 2));
        step_budget -= n;
        trans_budget -= t;
        sizes.push((n, t));
    }
    // How the second partial is started: 0 initial steps, 1 enclosing, 2 forcing.
    let link = if partials > 1 { rng.gen_range(0..3) } else { 0 };
    let host_step = rng.gen_range(0..sizes[0].0);

    let mut docs = Vec::new();
    for (p, &(n, t)) in sizes.iter().enumerate() {
        let prefix = format!("s{p}_");
        let enclosed = p == 1 && link == 1;
        let mut steps = Vec::new();
        let entry = subset(rng, n, 1, 2);
        for s in 0..n {
            let mut step = json!({"id": format!("{prefix}{s}")});
            if enclosed {
                if entry.contains(&s) {
                    step["marked"] = json!(true);
                }
            } else if (p == 0 || link == 0) && entry.contains(&s) {
                step["initial"] = json!(true);
            }
            steps.push(step);
        }
        let mut transitions = Vec::new();
        for i in 0..t {
            let source = rng.gen_bool(0.12);
            let from = if source { Vec::new() } else { subset(rng, n, 1, 2) };
            let to = if !source && rng.gen_bool(0.08) { Vec::new() } else { subset(rng, n, 1, 2) };
            let mut tr = json!({"id": format!("t{p}_{i}"), "from": names(&prefix, &from), "to": names(&prefix, &to)});
            if rng.gen_bool(0.6) {
                tr["cond"] = json!(*CONDITIONS.choose(rng).unwrap());
            }
            transitions.push(tr);
        }
        let mut actions = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            let step = format!("{prefix}{}", rng.gen_range(0..n));
            let mut a = match rng.gen_range(0..4) {
                0 => json!({"kind": "continuous", "step": step, "var": "y"}),
                1 => json!({"kind": "stored", "step": step, "var": "f",
                            "value": if rng.gen_bool(0.5) { "true" } else { "false" },
                            "trigger": "activation"}),
                _ => json!({"kind": "stored", "step": step, "var": "x",
                            "value": *VALUES.choose(rng).unwrap(),
                            "trigger": if rng.gen_bool(0.75) { "activation" } else { "deactivation" }}),
            };
            if rng.gen_bool(0.25) {
                a["cond"] = json!(*["u", "!v", "x < 2"].choose(rng).unwrap());
            }
            actions.push(a);
        }
        let mut partial = json!({"id": format!("G{p}"), "steps": steps, "transitions": transitions, "actions": actions});
        if p == 0 && partials > 1 {
            let host = format!("s0_{host_step}");
            match link {
                1 => partial["enclosings"] = json!([{"step": host, "target": "G1"}]),
                2 => {
                    let situation = if rng.gen_bool(0.3) {
                        json!("init")
                    } else {
                        names("s1_", &subset(rng, sizes[1].0, 1, 2))
                    };
                    partial["actions"]
                        .as_array_mut()
                        .unwrap()
                        .push(json!({"kind": "forcing", "step": host, "target": "G1", "situation": situation}));
                }
                _ => {}
            }
        }
        docs.push(partial);
    }
    if link == 2 && rng.gen_bool(0.5) {
        // Forcing to the initial situation needs one; otherwise leave G1 idle.
        let n = sizes[1].0;
        let init = subset(rng, n, 1, 1)[0];
        docs[1]["steps"][init]["initial"] = json!(true);
    }
    let doc = json!({
        "name": "random",
        "variables": [
            {"name": "u", "kind": "input", "type": "bool"},
            {"name": "v", "kind": "input", "type": "bool"},
            {"name": "x", "kind": "internal", "type": "int", "init": 0},
            {"name": "f", "kind": "internal", "type": "bool"},
            {"name": "y", "kind": "output", "type": "bool"}
        ],
        "partials": docs,
    });
    parse_spec(&doc.to_string()).ok()
}
