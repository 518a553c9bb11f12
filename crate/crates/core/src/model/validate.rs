//! Well-formedness checks for a parsed specification.

use std::collections::{BTreeMap, BTreeSet};

use super::{Action, ForcedSituation, GrafcetSpec, QueryKind, VarKind, VarType};
use crate::finding::{sort_findings, Element, Finding, FindingKind, Location, Severity};

const KEYWORDS: &[&str] = &["true", "false", "re", "fe"];

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !KEYWORDS.contains(&name)
}

fn is_step_id(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn error(location: Location, message: String) -> Finding {
    Finding::new(FindingKind::InvalidModel, Severity::Error, location, message)
}

/// Returns every violated model invariant as an `error` finding, in
/// canonical order. An empty result means the model is well-formed.
pub fn validate(spec: &GrafcetSpec) -> Vec<Finding> {
    let mut out = Vec::new();
    check_variables(spec, &mut out);
    check_partials(spec, &mut out);
    check_writers(spec, &mut out);
    check_queries(spec, &mut out);
    sort_findings(&mut out);
    out
}

fn check_variables(spec: &GrafcetSpec, out: &mut Vec<Finding>) {
    let mut seen = BTreeSet::new();
    for v in &spec.variables {
        let loc = Location::global(Element::Variable(v.name.clone()));
        if !is_identifier(&v.name) {
            out.push(error(loc.clone(), format!("`{}` is not a valid variable name", v.name)));
        }
        if !seen.insert(v.name.as_str()) {
            out.push(error(loc.clone(), format!("variable `{}` declared twice", v.name)));
        }
        match (v.kind, v.init) {
            (VarKind::Input, Some(_)) => {
                out.push(error(loc, format!("input `{}` must not have an initial value", v.name)))
            }
            (_, Some(i)) if v.ty == VarType::Bool && !(0..=1).contains(&i) => out.push(error(
                loc,
                format!("initial value {i} of Boolean `{}` is not 0 or 1", v.name),
            )),
            _ => {}
        }
    }
}

fn check_partials(spec: &GrafcetSpec, out: &mut Vec<Finding>) {
    if spec.partials.is_empty() {
        out.push(error(Location::spec(), "specification has no partial Grafcet".into()));
    }
    let mut seen = BTreeSet::new();
    for p in &spec.partials {
        let at = |e: Element| Location::in_partial(&p.id, e);
        if !is_identifier(&p.id) {
            out.push(error(
                Location::partial(&p.id),
                format!("`{}` is not a valid partial Grafcet identifier", p.id),
            ));
        }
        if !seen.insert(p.id.as_str()) {
            out.push(error(
                Location::partial(&p.id),
                format!("partial Grafcet `{}` declared twice", p.id),
            ));
        }

        let mut steps = BTreeSet::new();
        for s in &p.steps {
            if !is_step_id(&s.id) {
                out.push(error(
                    at(Element::Step(s.id.clone())),
                    format!("`{}` is not a valid step identifier", s.id),
                ));
            }
            if !steps.insert(s.id.as_str()) {
                out.push(error(
                    at(Element::Step(s.id.clone())),
                    format!("step `{}` declared twice", s.id),
                ));
            }
        }
        let has_step = |id: &str| steps.contains(id);

        for e in &p.enclosings {
            let loc = at(Element::Step(e.step.clone()));
            if !has_step(&e.step) {
                out.push(error(loc.clone(), format!("enclosing step `{}` does not exist", e.step)));
            }
            if e.target == p.id {
                out.push(error(loc, "a partial Grafcet cannot enclose itself".into()));
            } else {
                match spec.partial(&e.target) {
                    None => out.push(error(
                        loc,
                        format!("enclosed partial Grafcet `{}` does not exist", e.target),
                    )),
                    Some(tp) if !tp.is_enclosed() => out.push(error(
                        loc,
                        format!("enclosed partial Grafcet `{}` has no marked step", e.target),
                    )),
                    Some(_) => {}
                }
            }
        }

        let mut tids = BTreeSet::new();
        for t in &p.transitions {
            let loc = at(Element::Transition(t.id.clone()));
            if !tids.insert(t.id.as_str()) {
                out.push(error(loc.clone(), format!("transition `{}` declared twice", t.id)));
            }
            if t.upstream.is_empty() && t.downstream.is_empty() {
                out.push(error(loc.clone(), "empty transition: no upstream and no downstream step".into()));
            }
            for s in t.upstream.iter().chain(&t.downstream) {
                if !has_step(s) {
                    out.push(error(loc.clone(), format!("step `{s}` does not exist")));
                }
            }
            for msg in t.condition.type_errors(spec) {
                out.push(error(loc.clone(), format!("condition: {msg}")));
            }
        }

        for (i, a) in p.actions.iter().enumerate() {
            let loc = at(Element::Action(p.action_id(i)));
            if !has_step(a.step()) {
                out.push(error(loc.clone(), format!("step `{}` does not exist", a.step())));
            }
            match a {
                Action::Continuous { var, condition, .. } => {
                    match spec.variable(var) {
                        None => out.push(error(loc.clone(), format!("unknown variable `{var}`"))),
                        Some(d) if d.kind != VarKind::Output || d.ty != VarType::Bool => {
                            out.push(error(
                                loc.clone(),
                                format!("continuous action must write a Boolean output, `{var}` is not one"),
                            ))
                        }
                        _ => {}
                    }
                    for msg in condition.type_errors(spec) {
                        out.push(error(loc.clone(), format!("condition: {msg}")));
                    }
                }
                Action::Stored {
                    var,
                    value,
                    condition,
                    ..
                } => {
                    match spec.variable(var) {
                        None => out.push(error(loc.clone(), format!("unknown variable `{var}`"))),
                        Some(d) if d.kind == VarKind::Input => out.push(error(
                            loc.clone(),
                            format!("stored action cannot write input `{var}`"),
                        )),
                        Some(d) => {
                            for msg in value.type_errors(d.ty, spec) {
                                out.push(error(loc.clone(), format!("value: {msg}")));
                            }
                        }
                    }
                    for msg in condition.type_errors(spec) {
                        out.push(error(loc.clone(), format!("condition: {msg}")));
                    }
                }
                Action::Forcing {
                    target, situation, ..
                } => {
                    if target == &p.id {
                        out.push(error(loc.clone(), "a partial Grafcet cannot force itself".into()));
                    }
                    match spec.partial(target) {
                        None => out.push(error(
                            loc,
                            format!("forced partial Grafcet `{target}` does not exist"),
                        )),
                        Some(tp) => {
                            if let ForcedSituation::Steps(ss) = situation {
                                for s in ss {
                                    if tp.step_position(s).is_none() {
                                        out.push(error(
                                            loc.clone(),
                                            format!("forced step `{s}` is not a step of `{target}`"),
                                        ));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// A Boolean output driven by a continuous action may not also be the
/// target of a stored action.
fn check_writers(spec: &GrafcetSpec, out: &mut Vec<Finding>) {
    let mut continuous: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut stored: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for p in &spec.partials {
        for (i, a) in p.actions.iter().enumerate() {
            match a {
                Action::Continuous { var, .. } => {
                    continuous.entry(var).or_default().push(p.action_id(i))
                }
                Action::Stored { var, .. } => stored.entry(var).or_default().push(p.action_id(i)),
                Action::Forcing { .. } => {}
            }
        }
    }
    for (var, cont) in &continuous {
        if let Some(st) = stored.get(var) {
            out.push(
                error(
                    Location::global(Element::Variable((*var).to_owned())),
                    format!("`{var}` is written by both continuous and stored actions"),
                )
                .with_evidence("continuous", cont)
                .with_evidence("stored", st),
            );
        }
    }
}

fn check_queries(spec: &GrafcetSpec, out: &mut Vec<Finding>) {
    let mut names = BTreeSet::new();
    for q in &spec.queries {
        let loc = Location::global(Element::Query(q.name.clone()));
        if !names.insert(q.name.as_str()) {
            out.push(error(loc.clone(), format!("query `{}` declared twice", q.name)));
        }
        match &q.kind {
            QueryKind::NeverConcurrent { a, b } => {
                for s in [a, b] {
                    if spec.resolve_step(s).is_none() {
                        out.push(error(
                            loc.clone(),
                            format!("unknown step `{}.{}`", s.partial, s.step),
                        ));
                    }
                }
            }
            QueryKind::NeverCoactive { a, b } => {
                for (var, lit) in [a, b] {
                    match spec.variable(var) {
                        None => out.push(error(loc.clone(), format!("unknown variable `{var}`"))),
                        Some(d) if d.ty == VarType::Bool && !(0..=1).contains(lit) => out.push(
                            error(loc.clone(), format!("`{var}` is Boolean, literal {lit} is not")),
                        ),
                        _ => {}
                    }
                }
            }
        }
    }
}
