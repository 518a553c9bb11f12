//! Findings derived from the analysis results: races, condition
//! satisfiability, unreachable steps, unbounded activations and safety
//! queries.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::finding::{Element, Finding, FindingKind, Location, Severity};
use crate::invariants::InvariantSet;
use crate::model::{Action, BoolRef, CmpOp, Condition, GlobalStep, GrafcetSpec, QueryKind, SafetyQuery, Sum, Trigger, VarKind, VarType};
use crate::reachconc::GlobalConcurrency;
use crate::varapprox::{Ext, Interval, VarApprox};

struct Writer<'a> {
    partial: usize,
    index: usize,
    step: GlobalStep,
    action: &'a Action,
}

fn writers(spec: &GrafcetSpec) -> Vec<Writer<'_>> {
    let mut out = Vec::new();
    for (p, pg) in spec.partials.iter().enumerate() {
        for (i, a) in pg.actions.iter().enumerate() {
            if a.written_var().is_none() {
                continue;
            }
            if let Some(s) = pg.step_position(a.step()) {
                out.push(Writer {
                    partial: p,
                    index: i,
                    step: GlobalStep::new(p, s),
                    action: a,
                });
            }
        }
    }
    out
}

fn action_location(spec: &GrafcetSpec, w: &Writer<'_>, other: &Writer<'_>) -> Location {
    let pg = &spec.partials[w.partial];
    Location::in_partial(&pg.id, Element::Action(pg.action_id(w.index)))
        .with_related(Element::Action(spec.partials[other.partial].action_id(other.index)))
}

fn trigger(a: &Action) -> Option<Trigger> {
    match a {
        Action::Stored { trigger, .. } => Some(*trigger),
        _ => None,
    }
}

/// Whether two writers can execute at the same time.
fn overlapping(global: &GlobalConcurrency, a: &Writer<'_>, b: &Writer<'_>) -> Option<&'static str> {
    if !global.is_reachable(a.step) || !global.is_reachable(b.step) {
        return None;
    }
    if a.step == b.step {
        let split = matches!(
            (trigger(a.action), trigger(b.action)),
            (Some(Trigger::Activation), Some(Trigger::Deactivation))
                | (Some(Trigger::Deactivation), Some(Trigger::Activation))
        );
        if split && !global.concurrent(a.step, a.step) {
            return None;
        }
        return Some("same step");
    }
    global.concurrent(a.step, b.step).then_some("concurrent steps")
}

/// Stored actions writing the same variable at the same or concurrent steps.
pub fn detect_races(spec: &GrafcetSpec, global: &GlobalConcurrency) -> Vec<Finding> {
    let ws = writers(spec);
    let mut out = Vec::new();
    for (i, a) in ws.iter().enumerate() {
        for b in &ws[i + 1..] {
            let var = a.action.written_var().unwrap_or_default();
            let stored_a = matches!(a.action, Action::Stored { .. });
            let stored_b = matches!(b.action, Action::Stored { .. });
            if var == b.action.written_var().unwrap_or_default() {
                let (severity, what) = match (stored_a, stored_b) {
                    (true, true) => match overlapping(global, a, b) {
                        Some(why) => (Severity::Error, why),
                        None => continue,
                    },
                    (false, false) => continue,
                    _ => (Severity::Error, "continuous and stored writer"),
                };
                out.push(
                    Finding::new(
                        FindingKind::Race,
                        severity,
                        action_location(spec, a, b),
                        format!(
                            "`{var}` is written by actions at {} and {} ({what})",
                            spec.step_name(a.step),
                            spec.step_name(b.step)
                        ),
                    )
                    .with_evidence("variable", var)
                    .with_evidence("steps", [spec.step_name(a.step), spec.step_name(b.step)]),
                );
                continue;
            }
            // A continuous output read by a concurrent stored assignment.
            for (c, s) in [(a, b), (b, a)] {
                let (Action::Continuous { var, .. }, Action::Stored { value, .. }) = (c.action, s.action) else {
                    continue;
                };
                if value.variables().contains(var.as_str()) {
                    if let Some(why) = overlapping(global, c, s) {
                        out.push(
                            Finding::new(
                                FindingKind::Race,
                                Severity::Info,
                                action_location(spec, s, c),
                                format!(
                                    "value assigned at {} reads `{var}`, driven at {} ({why})",
                                    spec.step_name(s.step),
                                    spec.step_name(c.step)
                                ),
                            )
                            .with_evidence("variable", var)
                            .with_evidence("steps", [spec.step_name(s.step), spec.step_name(c.step)]),
                        );
                    }
                }
            }
        }
    }
    out
}

/// Kleene truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    False,
    True,
    Unknown,
}

impl Tri {
    fn not(self) -> Tri {
        match self {
            Tri::False => Tri::True,
            Tri::True => Tri::False,
            Tri::Unknown => Tri::Unknown,
        }
    }

    fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    fn or(self, o: Tri) -> Tri {
        self.not().and(o.not()).not()
    }
}

/// Abstract values used to evaluate conditions.
pub struct AbstractEnv<'a> {
    pub spec: &'a GrafcetSpec,
    pub approx: &'a BTreeMap<String, VarApprox>,
    pub global: &'a GlobalConcurrency,
}

impl AbstractEnv<'_> {
    fn bool_set(&self, r: &BoolRef) -> BTreeSet<bool> {
        match r {
            BoolRef::Step(s) => match self.spec.resolve_step(s) {
                Some(g) if self.global.is_reachable(g) => BTreeSet::from([false, true]),
                _ => BTreeSet::from([false]),
            },
            BoolRef::Var(v) => match self.approx.get(v) {
                Some(VarApprox::Bool(set)) => set.clone(),
                _ => BTreeSet::from([false, true]),
            },
        }
    }

    fn interval(&self, v: &str) -> Interval {
        match self.approx.get(v) {
            Some(VarApprox::Int(i)) => *i,
            _ => Interval::TOP,
        }
    }

    pub fn eval(&self, c: &Condition) -> Tri {
        match c {
            Condition::Const(true) => Tri::True,
            Condition::Const(false) => Tri::False,
            Condition::Ref(r) => {
                let set = self.bool_set(r);
                match (set.contains(&false), set.contains(&true)) {
                    (true, true) => Tri::Unknown,
                    (false, true) => Tri::True,
                    _ => Tri::False,
                }
            }
            Condition::Not(x) => self.eval(x).not(),
            Condition::And(a, b) => self.eval(a).and(self.eval(b)),
            Condition::Or(a, b) => self.eval(a).or(self.eval(b)),
            Condition::Rising(r) | Condition::Falling(r) => {
                if self.bool_set(r).len() <= 1 {
                    Tri::False
                } else {
                    Tri::Unknown
                }
            }
            Condition::Compare(op, a, b) => compare(*op, self.difference(a, b)),
        }
    }

    /// Interval of `a - b`.
    fn difference(&self, a: &Sum, b: &Sum) -> Interval {
        let (ka, ca) = a.linear_form();
        let (kb, cb) = b.linear_form();
        let mut coeffs: BTreeMap<String, i128> = BTreeMap::new();
        for (v, c) in ca {
            *coeffs.entry(v).or_default() += c as i128;
        }
        for (v, c) in cb {
            *coeffs.entry(v).or_default() -= c as i128;
        }
        let mut lo = Some(ka as i128 - kb as i128);
        let mut hi = lo;
        for (v, c) in coeffs {
            if c == 0 {
                continue;
            }
            let i = self.interval(&v);
            let (l, h) = if c > 0 { (i.lo, i.hi) } else { (i.hi, i.lo) };
            lo = scaled_add(lo, c, l);
            hi = scaled_add(hi, c, h);
        }
        let ext = |x: Option<i128>, inf: Ext| match x.map(i64::try_from) {
            Some(Ok(v)) => Ext::Finite(v),
            _ => inf,
        };
        Interval {
            lo: ext(lo, Ext::NegInf),
            hi: ext(hi, Ext::PosInf),
        }
    }
}

fn scaled_add(acc: Option<i128>, c: i128, e: Ext) -> Option<i128> {
    match e {
        Ext::Finite(v) => acc?.checked_add(c.checked_mul(v as i128)?),
        _ => None,
    }
}

fn compare(op: CmpOp, d: Interval) -> Tri {
    let zero = Ext::Finite(0);
    let (definitely, never) = match op {
        CmpOp::Eq => (d.lo == zero && d.hi == zero, d.lo > zero || d.hi < zero),
        CmpOp::Ne => (d.lo > zero || d.hi < zero, d.lo == zero && d.hi == zero),
        CmpOp::Lt => (d.hi < zero, d.lo >= zero),
        CmpOp::Le => (d.hi <= zero, d.lo > zero),
        CmpOp::Gt => (d.lo > zero, d.hi <= zero),
        CmpOp::Ge => (d.lo >= zero, d.hi < zero),
    };
    if definitely {
        Tri::True
    } else if never {
        Tri::False
    } else {
        Tri::Unknown
    }
}

/// Unsatisfiable transition and action conditions (error), and closed
/// conditions that always hold (info).
pub fn check_conditions(env: &AbstractEnv<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for pg in &env.spec.partials {
        let mut check = |element: Element, what: &str, c: &Condition| {
            if c.is_trivially_true() {
                return;
            }
            let loc = Location::in_partial(&pg.id, element);
            match env.eval(c) {
                Tri::False => out.push(
                    Finding::new(
                        FindingKind::UnsatCondition,
                        Severity::Error,
                        loc,
                        format!("{what} condition `{c}` can never hold"),
                    )
                    .with_evidence("condition", c.to_string()),
                ),
                Tri::True if c.is_closed() => out.push(
                    Finding::new(
                        FindingKind::AlwaysTrueCondition,
                        Severity::Info,
                        loc,
                        format!("{what} condition `{c}` always holds"),
                    )
                    .with_evidence("condition", c.to_string()),
                ),
                _ => {}
            }
        };
        for t in &pg.transitions {
            check(Element::Transition(t.id.clone()), "transition", &t.condition);
        }
        for (i, a) in pg.actions.iter().enumerate() {
            if let Some(c) = a.condition() {
                check(Element::Action(pg.action_id(i)), "action", c);
            }
        }
    }
    out
}

/// Steps that no initial situation reaches. Partial Grafcets that are dead
/// as a whole are reported separately.
pub fn unreachable_steps(spec: &GrafcetSpec, global: &GlobalConcurrency) -> Vec<Finding> {
    let mut out = Vec::new();
    for (p, pg) in spec.partials.iter().enumerate() {
        if !global.live[p].iter().any(|&l| l) {
            continue;
        }
        for (s, step) in pg.steps.iter().enumerate() {
            if !global.reachable[p][s] {
                out.push(Finding::new(
                    FindingKind::UnreachableStep,
                    Severity::Warning,
                    Location::in_partial(&pg.id, Element::Step(step.id.clone())),
                    format!("step {} is not reachable from any initial situation", spec.step_name(GlobalStep::new(p, s))),
                ));
            }
        }
    }
    out
}

/// Reachable steps without a positive entry in any S-invariant, and
/// partial Grafcets whose invariants could not be computed.
pub fn unbounded_activations(spec: &GrafcetSpec, invariants: &[InvariantSet], global: &GlobalConcurrency) -> Vec<Finding> {
    let mut out = Vec::new();
    for (p, pg) in spec.partials.iter().enumerate() {
        let inv = &invariants[p];
        if let Some(e) = inv.incomplete {
            out.push(Finding::new(
                FindingKind::AnalysisIncomplete,
                Severity::Warning,
                Location::partial(&pg.id),
                format!("{e}; all steps treated as unbounded"),
            ));
            continue;
        }
        for &s in &inv.boundedness.uncovered {
            if global.reachable[p][s] {
                out.push(
                    Finding::new(
                        FindingKind::UnboundedActivation,
                        Severity::Warning,
                        Location::in_partial(&pg.id, Element::Step(pg.steps[s].id.clone())),
                        format!(
                            "step {} is not covered by any S-invariant; its activity may accumulate without bound",
                            spec.step_name(GlobalStep::new(p, s))
                        ),
                    )
                    .with_evidence("s_invariants", inv.s_invariants.len()),
                );
            }
        }
    }
    out
}

/// Where `var = lit` can hold: `None` if anywhere the value set allows it,
/// otherwise the reachable steps whose continuous actions drive it.
fn holding_steps(spec: &GrafcetSpec, global: &GlobalConcurrency, var: &str, lit: i64) -> Option<Vec<GlobalStep>> {
    let decl = spec.variable(var)?;
    if decl.kind != VarKind::Output || decl.ty != VarType::Bool || lit != 1 {
        return None;
    }
    let drivers: Vec<GlobalStep> = writers(spec)
        .into_iter()
        .filter(|w| matches!(w.action, Action::Continuous { var: v, .. } if v == var))
        .map(|w| w.step)
        .filter(|&g| global.is_reachable(g))
        .collect();
    let stored = spec.partials.iter().flat_map(|p| &p.actions).any(|a| matches!(a, Action::Stored { var: v, .. } if v == var));
    if stored {
        return None;
    }
    Some(drivers)
}

fn possible(approx: &BTreeMap<String, VarApprox>, spec: &GrafcetSpec, var: &str, lit: i64) -> bool {
    match approx.get(var) {
        Some(a) => a.contains(lit),
        None => spec.variable(var).is_some_and(|d| d.ty == VarType::Int || (0..=1).contains(&lit)),
    }
}

/// Evaluates safety queries. In `naive` mode `never-coactive` is judged from
/// value sets alone.
pub fn run_queries(
    spec: &GrafcetSpec,
    queries: &[SafetyQuery],
    global: &GlobalConcurrency,
    approx: &BTreeMap<String, VarApprox>,
    naive: bool,
) -> Vec<Finding> {
    let mut out = Vec::new();
    for q in queries {
        let loc = Location::global(Element::Query(q.name.clone()));
        match &q.kind {
            QueryKind::NeverConcurrent { a, b } => {
                let (Some(ga), Some(gb)) = (spec.resolve_step(a), spec.resolve_step(b)) else {
                    out.push(Finding::new(FindingKind::InvalidModel, Severity::Error, loc, "query refers to an unknown step"));
                    continue;
                };
                if global.is_reachable(ga) && global.is_reachable(gb) && global.concurrent(ga, gb) {
                    out.push(
                        Finding::new(
                            FindingKind::QueryViolation,
                            Severity::Error,
                            loc,
                            format!("query `{}`: {} and {} may be active at the same time", q.name, spec.step_name(ga), spec.step_name(gb)),
                        )
                        .with_evidence("pair", [spec.step_name(ga), spec.step_name(gb)]),
                    );
                }
            }
            QueryKind::NeverCoactive { a, b } => {
                let both_possible = possible(approx, spec, &a.0, a.1) && possible(approx, spec, &b.0, b.1);
                if !both_possible {
                    continue;
                }
                let describe = |(v, l): &(String, i64)| format!("{v} = {l}");
                if naive {
                    out.push(
                        Finding::new(
                            FindingKind::QueryViolation,
                            Severity::Error,
                            loc,
                            format!("query `{}`: {} and {} may hold together (value sets)", q.name, describe(a), describe(b)),
                        )
                        .with_evidence("mode", "naive")
                        .with_evidence(
                            "values",
                            json!({ &a.0: approx.get(&a.0), &b.0: approx.get(&b.0) }),
                        ),
                    );
                    continue;
                }
                let witness: Option<(String, String)> = match (holding_steps(spec, global, &a.0, a.1), holding_steps(spec, global, &b.0, b.1)) {
                    (None, None) => Some(("anywhere".into(), "anywhere".into())),
                    (Some(w), None) => w.first().map(|&g| (spec.step_name(g), "anywhere".into())),
                    (None, Some(w)) => w.first().map(|&g| ("anywhere".into(), spec.step_name(g))),
                    (Some(wa), Some(wb)) => wa.iter().find_map(|&x| {
                        wb.iter()
                            .find(|&&y| x == y || global.concurrent(x, y))
                            .map(|&y| (spec.step_name(x), spec.step_name(y)))
                    }),
                };
                if let Some((x, y)) = witness {
                    out.push(
                        Finding::new(
                            FindingKind::QueryViolation,
                            Severity::Error,
                            loc,
                            format!("query `{}`: {} and {} may hold together", q.name, describe(a), describe(b)),
                        )
                        .with_evidence("mode", "concurrency")
                        .with_evidence("steps", [x, y]),
                    );
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_condition;
    use crate::varapprox::Ext;

    fn env_spec() -> GrafcetSpec {
        crate::ingest::parse_spec(
            r#"{"name": "x",
              "variables": [{"name": "k", "kind": "internal", "type": "int", "init": 0},
                            {"name": "b", "kind": "input", "type": "bool"}],
              "partials": [{"id": "G1", "steps": [{"id": "1", "initial": true}, {"id": "2"}]}]}"#,
        )
        .unwrap()
    }

    fn eval(text: &str) -> Tri {
        let spec = env_spec();
        let approx = BTreeMap::from([(
            "k".to_owned(),
            VarApprox::Int(Interval {
                lo: Ext::Finite(0),
                hi: Ext::Finite(4),
            }),
        )]);
        let global = GlobalConcurrency {
            reachable: vec![vec![true, false]],
            live: vec![vec![true]],
            reentrant: vec![false],
            ..Default::default()
        };
        let env = AbstractEnv {
            spec: &spec,
            approx: &approx,
            global: &global,
        };
        env.eval(&parse_condition(text).unwrap())
    }

    #[test]
    fn interval_comparisons() {
        assert_eq!(eval("k = 7"), Tri::False);
        assert_eq!(eval("k <= 4"), Tri::True);
        assert_eq!(eval("k = 3"), Tri::Unknown);
        assert_eq!(eval("k - k = 0"), Tri::True);
        assert_eq!(eval("2 * k > 8"), Tri::False);
        assert_eq!(eval("0 - k <= 0"), Tri::True);
    }

    #[test]
    fn step_variables() {
        assert_eq!(eval("XG1.2"), Tri::False);
        assert_eq!(eval("XG1.1"), Tri::Unknown);
        assert_eq!(eval("re(XG1.2)"), Tri::False);
        assert_eq!(eval("!XG1.2"), Tri::True);
    }

    #[test]
    fn kleene_logic() {
        assert_eq!(eval("b | true"), Tri::True);
        assert_eq!(eval("b & false"), Tri::False);
        assert_eq!(eval("b & k = 9"), Tri::False);
        assert_eq!(eval("re(b)"), Tri::Unknown);
    }
}
