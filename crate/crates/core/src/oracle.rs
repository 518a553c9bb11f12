//! Explicit-state interpreter for small specifications, used to check the
//! structural analyses against concrete behaviour.
//!
//! Steps carry a multiplicity (clamped at a cap) so that source transitions
//! and rejoining branches are represented faithfully. An evolution fires
//! either a single enabled transition or a maximal set of enabled
//! transitions that do not compete for activity, then applies enclosing
//! activation/deactivation, forcing orders and actions.
//!
//! In structural mode every transition condition may hold and every
//! conditional action may or may not execute. In semantic mode conditions
//! are evaluated over enumerated input valuations with one step of history
//! for edges.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::hierarchy::build_hierarchy;
use crate::model::{
    Action, BoolRef, Condition, ForcedSituation, GlobalStep, GrafcetSpec, Topology, Trigger, ValueExpr, VarKind, VarType,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Structural,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub mode: Mode,
    /// Maximum multiplicity of a step.
    pub multiplicity: u8,
    /// Exploration stops (inconclusive) beyond this many states.
    pub max_states: usize,
    /// States with an integer variable outside `[-w, w]` are recorded but
    /// not expanded.
    pub int_window: i64,
    /// Track per-step activation counters (saturating at 15).
    pub count_activations: bool,
    /// Values tried for integer inputs in semantic mode.
    pub int_inputs: [i64; 2],
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Structural,
            multiplicity: 3,
            max_states: 100_000,
            int_window: 20,
            count_activations: false,
            int_inputs: [0, 1],
        }
    }
}

/// A transition or action condition of one partial Grafcet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Transition(usize, usize),
    Action(usize, usize),
}

/// Everything observed during an exploration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleFacts {
    pub states: usize,
    /// The state cap was hit; the facts are partial.
    pub inconclusive: bool,
    pub reachable: BTreeSet<GlobalStep>,
    /// Distinct steps active together, `(a, b)` with `a < b`.
    pub concurrent: BTreeSet<(GlobalStep, GlobalStep)>,
    /// Steps observed with multiplicity above one.
    pub multiple: BTreeSet<GlobalStep>,
    /// Observed values of internal and output variables.
    pub values: BTreeMap<String, BTreeSet<i64>>,
    /// Pairs of stored actions (ids, sorted) writing the same variable in
    /// one evolution while their steps are the same or active together.
    pub conflicts: BTreeSet<(String, String)>,
    /// Highest activation count per step (when tracked).
    pub activations: BTreeMap<GlobalStep, u8>,
    /// Conditions observed to evaluate true (semantic mode).
    pub true_conditions: BTreeSet<Site>,
    /// Valuations of Boolean outputs/internals seen together, for queries.
    pub valuations: BTreeSet<Vec<i64>>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    marks: Vec<u8>,
    vars: Vec<i64>,
    prev_vars: Vec<i64>,
    prev_active: Vec<bool>,
    counts: Vec<u8>,
}

struct StoredAction<'a> {
    id: String,
    step: usize,
    var: usize,
    value: &'a ValueExpr,
    trigger: Trigger,
    condition: &'a Condition,
    site: Site,
}

struct ContinuousAction<'a> {
    step: usize,
    var: usize,
    condition: &'a Condition,
    site: Site,
}

struct Forcing {
    step: usize,
    target: usize,
    /// `None` freezes the current situation.
    steps: Option<Vec<usize>>,
}

struct GlobalTransition<'a> {
    partial: usize,
    pre: Vec<usize>,
    post: Vec<usize>,
    condition: &'a Condition,
    site: Site,
}

struct Machine<'a> {
    spec: &'a GrafcetSpec,
    config: OracleConfig,
    offsets: Vec<usize>,
    step_count: usize,
    step_partial: Vec<usize>,
    order: Vec<usize>,
    transitions: Vec<GlobalTransition<'a>>,
    enclosings: Vec<(usize, usize)>,
    has_incoming: Vec<bool>,
    enclosed_by: Vec<Vec<usize>>,
    marked: Vec<Vec<usize>>,
    initial: Vec<Vec<usize>>,
    forcings: Vec<Forcing>,
    stored: Vec<StoredAction<'a>>,
    continuous: Vec<ContinuousAction<'a>>,
    var_index: BTreeMap<&'a str, usize>,
    inputs: Vec<usize>,
    tracked: Vec<usize>,
}

/// Concrete values for condition evaluation.
struct Env<'m, 'a> {
    m: &'m Machine<'a>,
    vars: &'m [i64],
    prev_vars: &'m [i64],
    active: &'m [bool],
    prev_active: &'m [bool],
}

impl Env<'_, '_> {
    fn bool_ref(&self, r: &BoolRef, prev: bool) -> bool {
        match r {
            BoolRef::Var(v) => {
                let i = self.m.var_index[v.as_str()];
                (if prev { self.prev_vars } else { self.vars })[i] != 0
            }
            BoolRef::Step(s) => match self.m.spec.resolve_step(s) {
                Some(g) => {
                    let f = self.m.offsets[g.partial] + g.step;
                    (if prev { self.prev_active } else { self.active })[f]
                }
                None => false,
            },
        }
    }

    fn int(&self, name: &str) -> i64 {
        self.vars[self.m.var_index[name]]
    }

    fn eval(&self, c: &Condition) -> bool {
        match c {
            Condition::Const(b) => *b,
            Condition::Ref(r) => self.bool_ref(r, false),
            Condition::Not(x) => !self.eval(x),
            Condition::And(a, b) => self.eval(a) && self.eval(b),
            Condition::Or(a, b) => self.eval(a) || self.eval(b),
            Condition::Rising(r) => self.bool_ref(r, false) && !self.bool_ref(r, true),
            Condition::Falling(r) => !self.bool_ref(r, false) && self.bool_ref(r, true),
            Condition::Compare(op, a, b) => op.holds(a.eval(&|v| self.int(v)), b.eval(&|v| self.int(v))),
        }
    }
}

/// One way an evolution can go.
struct Outcome {
    marks: Vec<u8>,
    added: Vec<u32>,
    removed: Vec<u32>,
}

impl<'a> Machine<'a> {
    fn new(spec: &'a GrafcetSpec, config: OracleConfig) -> Option<Self> {
        let (graph, cycles) = build_hierarchy(spec);
        if !cycles.is_empty() {
            return None;
        }
        let order = graph.topological_order()?;
        let topologies: Vec<Topology> = spec.partials.iter().map(|p| p.topology()).collect();
        let mut offsets = Vec::new();
        let mut step_partial = Vec::new();
        let mut n = 0;
        for (p, t) in topologies.iter().enumerate() {
            offsets.push(n);
            n += t.step_count;
            step_partial.extend(std::iter::repeat_n(p, t.step_count));
        }
        let var_index: BTreeMap<&str, usize> = spec.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
        let mut transitions = Vec::new();
        let mut enclosings = Vec::new();
        let mut forcings = Vec::new();
        let mut stored = Vec::new();
        let mut continuous = Vec::new();
        let mut has_incoming = vec![false; spec.partials.len()];
        let mut enclosed_by = vec![Vec::new(); spec.partials.len()];
        for (p, pg) in spec.partials.iter().enumerate() {
            let topo = &topologies[p];
            let off = offsets[p];
            for (ti, t) in pg.transitions.iter().enumerate() {
                transitions.push(GlobalTransition {
                    partial: p,
                    pre: topo.pre[ti].iter().map(|s| s + off).collect(),
                    post: topo.post[ti].iter().map(|s| s + off).collect(),
                    condition: &t.condition,
                    site: Site::Transition(p, ti),
                });
            }
            for e in &pg.enclosings {
                let (Some(s), Some(target)) = (pg.step_position(&e.step), spec.partial_position(&e.target)) else {
                    return None;
                };
                enclosings.push((s + off, target));
                has_incoming[target] = true;
                enclosed_by[target].push(s + off);
            }
            for (ai, a) in pg.actions.iter().enumerate() {
                let step = pg.step_position(a.step())? + off;
                match a {
                    Action::Continuous { var, condition, .. } => continuous.push(ContinuousAction {
                        step,
                        var: var_index[var.as_str()],
                        condition,
                        site: Site::Action(p, ai),
                    }),
                    Action::Stored {
                        var,
                        value,
                        trigger,
                        condition,
                        ..
                    } => stored.push(StoredAction {
                        id: pg.action_id(ai),
                        step,
                        var: var_index[var.as_str()],
                        value,
                        trigger: *trigger,
                        condition,
                        site: Site::Action(p, ai),
                    }),
                    Action::Forcing { target, situation, .. } => {
                        let tp = spec.partial_position(target)?;
                        has_incoming[tp] = true;
                        let tpg = &spec.partials[tp];
                        let steps = match situation {
                            ForcedSituation::Steps(ss) => Some(ss.iter().filter_map(|s| tpg.step_position(s)).collect()),
                            ForcedSituation::Init => Some(tpg.steps.iter().enumerate().filter(|(_, s)| s.initial).map(|(i, _)| i).collect()),
                            ForcedSituation::Current => None,
                        };
                        forcings.push(Forcing { step, target: tp, steps });
                    }
                }
            }
        }
        let marked = spec
            .partials
            .iter()
            .map(|p| p.steps.iter().enumerate().filter(|(_, s)| s.marked).map(|(i, _)| i).collect())
            .collect();
        let initial = spec
            .partials
            .iter()
            .map(|p| p.steps.iter().enumerate().filter(|(_, s)| s.initial).map(|(i, _)| i).collect())
            .collect();
        let inputs = spec.variables.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Input).map(|(i, _)| i).collect();
        let tracked = spec.variables.iter().enumerate().filter(|(_, v)| v.kind != VarKind::Input).map(|(i, _)| i).collect();
        Some(Self {
            spec,
            config,
            offsets,
            step_count: n,
            step_partial,
            order,
            transitions,
            enclosings,
            has_incoming,
            enclosed_by,
            marked,
            initial,
            forcings,
            stored,
            continuous,
            var_index,
            inputs,
            tracked,
        })
    }

    fn partial_steps(&self, p: usize) -> std::ops::Range<usize> {
        let end = self.offsets.get(p + 1).copied().unwrap_or(self.step_count);
        self.offsets[p]..end
    }

    fn frozen(&self, marks: &[u8]) -> Vec<bool> {
        let mut f = vec![false; self.spec.partials.len()];
        for fo in &self.forcings {
            if marks[fo.step] > 0 {
                f[fo.target] = true;
            }
        }
        f
    }

    fn alive(&self, marks: &[u8], p: usize) -> bool {
        !self.has_incoming[p]
            || self.enclosed_by[p].iter().any(|&e| marks[e] > 0)
            || self.partial_steps(p).any(|s| marks[s] > 0)
    }

    /// Applies enclosing and forcing effects, superiors first, given the
    /// activity before the evolution and the tentative activity after it.
    fn propagate(&self, before: &[u8], marks: &mut [u8], added: &mut [u32], removed: &mut [u32]) {
        let cap = self.config.multiplicity;
        let np = self.spec.partials.len();
        let mut kill = vec![false; np];
        let mut activate = vec![false; np];
        for &p in &self.order {
            let range = self.partial_steps(p);
            if kill[p] {
                for s in range.clone() {
                    removed[s] += marks[s] as u32;
                    marks[s] = 0;
                }
            }
            if activate[p] {
                for &m in &self.marked[p] {
                    let s = self.offsets[p] + m;
                    marks[s] = (marks[s] + 1).min(cap);
                    added[s] += 1;
                }
            }
            for fo in self.forcings.iter().filter(|f| f.target == p) {
                if marks[fo.step] == 0 {
                    continue;
                }
                let Some(steps) = &fo.steps else { continue };
                for s in range.clone() {
                    let want = u8::from(steps.contains(&(s - self.offsets[p])));
                    if want > marks[s] {
                        added[s] += (want - marks[s]) as u32;
                    } else {
                        removed[s] += (marks[s] - want) as u32;
                    }
                    marks[s] = want;
                }
            }
            for &(e, target) in &self.enclosings {
                if self.step_partial[e] != p {
                    continue;
                }
                let was = before[e] > 0;
                let now = marks[e] > 0;
                if was && !now {
                    kill[target] = true;
                } else if !was && now {
                    activate[target] = true;
                }
            }
        }
    }

    fn initial_outcome(&self) -> Outcome {
        let n = self.step_count;
        let before = vec![0u8; n];
        let mut marks = vec![0u8; n];
        let mut added = vec![0u32; n];
        let mut removed = vec![0u32; n];
        for (p, init) in self.initial.iter().enumerate() {
            for &s in init {
                marks[self.offsets[p] + s] = 1;
                added[self.offsets[p] + s] = 1;
            }
        }
        self.propagate(&before, &mut marks, &mut added, &mut removed);
        Outcome { marks, added, removed }
    }

    /// Singletons plus maximal sets of candidates whose combined demand on
    /// each step does not exceed its multiplicity.
    fn firing_sets(&self, marks: &[u8], candidates: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = candidates.iter().map(|&t| vec![t]).collect();
        let fits = |set: &[usize], extra: usize| {
            let mut demand: BTreeMap<usize, u32> = BTreeMap::new();
            for &t in set.iter().chain(std::iter::once(&extra)) {
                for &s in &self.transitions[t].pre {
                    *demand.entry(s).or_default() += 1;
                }
            }
            demand.iter().all(|(&s, &d)| d <= marks[s] as u32)
        };
        if candidates.len() > 12 {
            let mut greedy = Vec::new();
            for &t in candidates {
                if fits(&greedy, t) {
                    greedy.push(t);
                }
            }
            out.push(greedy);
        } else {
            let mut all = Vec::new();
            let mut current = Vec::new();
            fn rec(i: usize, c: &[usize], cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>, fits: &dyn Fn(&[usize], usize) -> bool) {
                if i == c.len() {
                    if c.iter().all(|t| cur.contains(t) || !fits(cur, *t)) {
                        all.push(cur.clone());
                    }
                    return;
                }
                if fits(cur, c[i]) {
                    cur.push(c[i]);
                    rec(i + 1, c, cur, all, fits);
                    cur.pop();
                }
                rec(i + 1, c, cur, all, fits);
            }
            rec(0, candidates, &mut current, &mut all, &fits);
            out.extend(all);
        }
        out.sort();
        out.dedup();
        out.retain(|s| !s.is_empty());
        out
    }

    fn fire(&self, before: &[u8], set: &[usize]) -> Outcome {
        let n = self.step_count;
        let mut marks = before.to_vec();
        let mut added = vec![0u32; n];
        let mut removed = vec![0u32; n];
        let mut delta = vec![0i32; n];
        for &t in set {
            let gt = &self.transitions[t];
            for &s in &gt.pre {
                if !gt.post.contains(&s) {
                    delta[s] -= 1;
                    removed[s] += 1;
                }
            }
            for &s in &gt.post {
                if !gt.pre.contains(&s) {
                    delta[s] += 1;
                    added[s] += 1;
                }
            }
        }
        for s in 0..n {
            let v = (marks[s] as i32 + delta[s]).clamp(0, self.config.multiplicity as i32);
            marks[s] = v as u8;
        }
        self.propagate(before, &mut marks, &mut added, &mut removed);
        Outcome { marks, added, removed }
    }
}

/// Explores every reachable state from the initial situation of `spec`.
/// Returns an inconclusive, empty result if the hierarchy is cyclic.
pub fn explore(spec: &GrafcetSpec, config: &OracleConfig) -> OracleFacts {
    let Some(m) = Machine::new(spec, *config) else {
        return OracleFacts {
            inconclusive: true,
            ..Default::default()
        };
    };
    Explorer::new(&m).run()
}

struct Explorer<'m, 'a> {
    m: &'m Machine<'a>,
    facts: OracleFacts,
    seen: HashSet<State>,
    queue: VecDeque<State>,
}

impl<'m, 'a> Explorer<'m, 'a> {
    fn new(m: &'m Machine<'a>) -> Self {
        Self {
            m,
            facts: OracleFacts::default(),
            seen: HashSet::new(),
            queue: VecDeque::new(),
        }
    }

    fn input_valuations(&self) -> Vec<Vec<(usize, i64)>> {
        let m = self.m;
        let mut out = vec![Vec::new()];
        if m.config.mode == Mode::Structural {
            return out;
        }
        for &i in &m.inputs {
            let choices: Vec<i64> = match m.spec.variables[i].ty {
                VarType::Bool => vec![0, 1],
                VarType::Int => m.config.int_inputs.to_vec(),
            };
            out = out
                .into_iter()
                .flat_map(|v| {
                    choices.iter().map(move |&c| {
                        let mut w = v.clone();
                        w.push((i, c));
                        w
                    })
                })
                .collect();
        }
        out
    }

    fn run(mut self) -> OracleFacts {
        let m = self.m;
        let init_vars: Vec<i64> = m.spec.variables.iter().map(|v| v.init_value()).collect();
        let semantic = m.config.mode == Mode::Semantic;
        let start = m.initial_outcome();
        let zero_active = vec![false; m.step_count];
        for valuation in self.input_valuations() {
            let mut vars = init_vars.clone();
            for &(i, v) in &valuation {
                vars[i] = v;
            }
            let pre = State {
                marks: vec![0; m.step_count],
                vars: vars.clone(),
                prev_vars: if semantic { vars.clone() } else { Vec::new() },
                prev_active: if semantic { zero_active.clone() } else { Vec::new() },
                counts: if m.config.count_activations { vec![0; m.step_count] } else { Vec::new() },
            };
            self.successors(&pre, &vars, &start);
        }
        while let Some(state) = self.queue.pop_front() {
            if self.seen.len() > m.config.max_states {
                self.facts.inconclusive = true;
                break;
            }
            self.expand(&state);
        }
        self.facts.states = self.seen.len();
        self.facts
    }

    fn expand(&mut self, x: &State) {
        let m = self.m;
        let semantic = m.config.mode == Mode::Semantic;
        let frozen = m.frozen(&x.marks);
        let active: Vec<bool> = x.marks.iter().map(|&c| c > 0).collect();
        for valuation in self.input_valuations() {
            let mut now = x.vars.clone();
            for &(i, v) in &valuation {
                now[i] = v;
            }
            let (prev_vars, prev_active) = if semantic {
                let mut pv = x.prev_vars.clone();
                for &i in &m.inputs {
                    pv[i] = x.vars[i];
                }
                (pv, x.prev_active.clone())
            } else {
                (Vec::new(), Vec::new())
            };
            let env = Env {
                m,
                vars: &now,
                prev_vars: &prev_vars,
                active: &active,
                prev_active: &prev_active,
            };
            if semantic {
                for gt in &m.transitions {
                    if env.eval(gt.condition) {
                        self.facts.true_conditions.insert(gt.site);
                    }
                }
                for a in &m.stored {
                    if env.eval(a.condition) {
                        self.facts.true_conditions.insert(a.site);
                    }
                }
                for a in &m.continuous {
                    if env.eval(a.condition) {
                        self.facts.true_conditions.insert(a.site);
                    }
                }
            }
            let candidates: Vec<usize> = (0..m.transitions.len())
                .filter(|&t| {
                    let gt = &m.transitions[t];
                    !frozen[gt.partial]
                        && gt.pre.iter().all(|&s| x.marks[s] > 0)
                        && (!gt.pre.is_empty() || m.alive(&x.marks, gt.partial))
                        && (!semantic || env.eval(gt.condition))
                })
                .collect();
            let mut outcomes: Vec<Outcome> = m.firing_sets(&x.marks, &candidates).iter().map(|set| m.fire(&x.marks, set)).collect();
            if semantic {
                outcomes.push(Outcome {
                    marks: x.marks.clone(),
                    added: vec![0; m.step_count],
                    removed: vec![0; m.step_count],
                });
            }
            let pre = State {
                prev_vars,
                prev_active,
                ..x.clone()
            };
            for o in &outcomes {
                self.successors(&pre, &now, o);
            }
        }
    }

    /// Executes the actions of one evolution and enqueues the resulting
    /// states. `vars` holds the variable values including the inputs chosen
    /// for this evolution.
    fn successors(&mut self, x: &State, vars: &[i64], o: &Outcome) {
        let m = self.m;
        let semantic = m.config.mode == Mode::Semantic;
        let active_now: Vec<bool> = o.marks.iter().map(|&c| c > 0).collect();
        let active_before: Vec<bool> = x.marks.iter().map(|&c| c > 0).collect();

        let mut execs: Vec<usize> = Vec::new();
        for (i, a) in m.stored.iter().enumerate() {
            let times = match a.trigger {
                Trigger::Activation | Trigger::During => o.added[a.step],
                Trigger::Deactivation => o.removed[a.step],
            };
            for _ in 0..times.min(4) {
                execs.push(i);
            }
        }
        for (i, &a) in execs.iter().enumerate() {
            for &b in &execs[i + 1..] {
                let (sa, sb) = (&m.stored[a], &m.stored[b]);
                if a == b || sa.var != sb.var {
                    continue;
                }
                let together = sa.step == sb.step
                    || (active_before[sa.step] && active_before[sb.step])
                    || (active_now[sa.step] && active_now[sb.step]);
                if together {
                    let pair = if sa.id < sb.id { (sa.id.clone(), sb.id.clone()) } else { (sb.id.clone(), sa.id.clone()) };
                    self.facts.conflicts.insert(pair);
                }
            }
        }

        let prev_active_for_env = if semantic { x.prev_active.clone() } else { active_before.clone() };
        let orders = orders(&execs);
        let mut results: BTreeSet<Vec<i64>> = BTreeSet::new();
        for order in orders {
            let conditional: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(_, &i)| !m.stored[i].condition.is_trivially_true())
                .map(|(k, _)| k)
                .collect();
            let choices: Vec<Vec<bool>> = if semantic || conditional.len() > 6 {
                vec![vec![true; order.len()]]
            } else {
                (0..1u32 << conditional.len())
                    .map(|mask| {
                        let mut run = vec![true; order.len()];
                        for (bit, &k) in conditional.iter().enumerate() {
                            run[k] = mask & (1 << bit) != 0;
                        }
                        run
                    })
                    .collect()
            };
            for run in choices {
                let mut cur = vars.to_vec();
                for (k, &i) in order.iter().enumerate() {
                    if !run[k] {
                        continue;
                    }
                    let a = &m.stored[i];
                    let env = Env {
                        m,
                        vars: &cur,
                        prev_vars: if semantic { &x.prev_vars } else { &cur },
                        active: &active_now,
                        prev_active: &prev_active_for_env,
                    };
                    if semantic && !env.eval(a.condition) {
                        continue;
                    }
                    let v = match a.value {
                        ValueExpr::Int(sum) => sum.eval(&|n| cur[m.var_index[n]]),
                        ValueExpr::Bool(c) => i64::from(if semantic { env.eval(c) } else { structural_bool(c, &env) }),
                    };
                    let v = if m.spec.variables[a.var].ty == VarType::Bool { i64::from(v != 0) } else { v };
                    cur[a.var] = v;
                }
                results.insert(cur);
            }
        }

        for mut vars_after in results {
            // Continuous outputs follow the activity of their steps.
            let mut outputs: BTreeMap<usize, (bool, bool)> = BTreeMap::new();
            for a in &m.continuous {
                let e = outputs.entry(a.var).or_insert((false, false));
                if active_now[a.step] {
                    let env = Env {
                        m,
                        vars: &vars_after,
                        prev_vars: if semantic { &x.prev_vars } else { &vars_after },
                        active: &active_now,
                        prev_active: &prev_active_for_env,
                    };
                    if a.condition.is_trivially_true() || (semantic && env.eval(a.condition)) {
                        e.0 = true;
                    } else if !semantic {
                        e.1 = true;
                    }
                }
            }
            let mut variants = vec![vars_after.clone()];
            for (&var, &(forced, maybe)) in &outputs {
                let options: Vec<i64> = match (forced, maybe) {
                    (true, _) => vec![1],
                    (false, true) => vec![0, 1],
                    (false, false) => vec![0],
                };
                variants = variants
                    .into_iter()
                    .flat_map(|v| {
                        options.iter().map(move |&o| {
                            let mut w = v.clone();
                            w[var] = o;
                            w
                        })
                    })
                    .collect();
            }
            vars_after.clear();
            for vars_final in variants {
                self.record(o, &vars_final, &active_now);
                if m.tracked.iter().any(|&i| vars_final[i].abs() > m.config.int_window) {
                    continue;
                }
                let mut counts = x.counts.clone();
                if !counts.is_empty() {
                    for (s, c) in counts.iter_mut().enumerate() {
                        *c = (*c as u32 + o.added[s]).min(15) as u8;
                    }
                    for (s, &c) in counts.iter().enumerate() {
                        let g = self.global(s);
                        let e = self.facts.activations.entry(g).or_insert(0);
                        *e = (*e).max(c);
                    }
                }
                let next = State {
                    marks: o.marks.clone(),
                    prev_vars: if semantic { x.vars.clone() } else { Vec::new() },
                    prev_active: if semantic { active_before.clone() } else { Vec::new() },
                    vars: vars_final,
                    counts,
                };
                if self.seen.insert(next.clone()) {
                    self.queue.push_back(next);
                }
            }
        }
    }

    fn global(&self, flat: usize) -> GlobalStep {
        let p = self.m.step_partial[flat];
        GlobalStep::new(p, flat - self.m.offsets[p])
    }

    fn record(&mut self, o: &Outcome, vars: &[i64], active: &[bool]) {
        let m = self.m;
        let on: Vec<usize> = (0..m.step_count).filter(|&s| active[s]).collect();
        for (i, &a) in on.iter().enumerate() {
            let ga = self.global(a);
            self.facts.reachable.insert(ga);
            if o.marks[a] > 1 {
                self.facts.multiple.insert(ga);
            }
            for &b in &on[i + 1..] {
                self.facts.concurrent.insert((ga, self.global(b)));
            }
        }
        for &i in &m.tracked {
            self.facts.values.entry(m.spec.variables[i].name.clone()).or_default().insert(vars[i]);
        }
        self.facts.valuations.insert(m.tracked.iter().map(|&i| vars[i]).collect());
    }
}

/// A Boolean value expression in structural mode: inputs read as 0 and
/// edges as false.
fn structural_bool(c: &Condition, env: &Env<'_, '_>) -> bool {
    match c {
        Condition::Rising(_) | Condition::Falling(_) => false,
        Condition::Not(x) => !structural_bool(x, env),
        Condition::And(a, b) => structural_bool(a, env) && structural_bool(b, env),
        Condition::Or(a, b) => structural_bool(a, env) || structural_bool(b, env),
        other => env.eval(other),
    }
}

/// Execution orders tried for one evolution: all permutations of up to four
/// executions, otherwise the given order and its reverse.
fn orders(execs: &[usize]) -> Vec<Vec<usize>> {
    if execs.len() > 4 {
        let mut rev = execs.to_vec();
        rev.reverse();
        return vec![execs.to_vec(), rev];
    }
    fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut out = Vec::new();
    permute(&mut execs.to_vec(), 0, &mut out);
    out.sort();
    out.dedup();
    out
}

impl OracleFacts {
    /// Names of tracked variables, in the order used by `valuations`.
    pub fn tracked_variables(spec: &GrafcetSpec) -> Vec<String> {
        spec.variables.iter().filter(|v| v.kind != VarKind::Input).map(|v| v.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_spec;

    fn spec(text: &str) -> GrafcetSpec {
        parse_spec(text).unwrap()
    }

    #[test]
    fn chain_has_no_concurrency() {
        let s = spec(
            r#"{"name": "c", "variables": [],
              "partials": [{"id": "G", "steps": [{"id": "1", "initial": true}, {"id": "2"}, {"id": "3"}],
                "transitions": [{"id": "a", "from": ["1"], "to": ["2"]}, {"id": "b", "from": ["2"], "to": ["3"]}]}]}"#,
        );
        let f = explore(&s, &OracleConfig::default());
        assert!(!f.inconclusive);
        assert_eq!(f.reachable.len(), 3);
        assert!(f.concurrent.is_empty());
    }

    #[test]
    fn loop_runs_unboundedly() {
        let s = spec(
            r#"{"name": "l",
              "variables": [{"name": "x", "kind": "internal", "type": "int", "init": 0}],
              "partials": [{"id": "G", "steps": [{"id": "1", "initial": true}, {"id": "2"}],
                "transitions": [{"id": "a", "from": ["1"], "to": ["2"]}, {"id": "b", "from": ["2"], "to": ["1"]}],
                "actions": [{"kind": "stored", "step": "2", "var": "x", "value": "x + 1", "trigger": "activation"}]}]}"#,
        );
        let f = explore(&s, &OracleConfig::default());
        assert!(!f.inconclusive);
        // The value grows until the window stops exploration.
        assert!(f.values["x"].contains(&21));
    }

    #[test]
    fn enclosing_activates_and_kills() {
        let s = spec(
            r#"{"name": "e", "variables": [],
              "partials": [
                {"id": "P", "steps": [{"id": "1", "initial": true}, {"id": "2"}],
                 "enclosings": [{"step": "1", "target": "A"}],
                 "transitions": [{"id": "t", "from": ["1"], "to": ["2"]}]},
                {"id": "A", "steps": [{"id": "1", "marked": true}, {"id": "2"}],
                 "transitions": [{"id": "u", "from": ["1"], "to": ["2"]}]}]}"#,
        );
        let f = explore(&s, &OracleConfig::default());
        let p2 = GlobalStep::new(0, 1);
        assert!(f.reachable.contains(&GlobalStep::new(1, 1)));
        assert!(f.reachable.contains(&p2));
        assert!(!f.concurrent.iter().any(|&(a, b)| a == p2 || b == p2));
    }

    #[test]
    fn semantic_edges_need_history() {
        let s = spec(
            r#"{"name": "s",
              "variables": [{"name": "u", "kind": "input", "type": "bool"}],
              "partials": [{"id": "G", "steps": [{"id": "1", "initial": true}, {"id": "2"}],
                "transitions": [{"id": "a", "from": ["1"], "to": ["2"], "cond": "re(u)"},
                                {"id": "b", "from": ["2"], "to": ["1"], "cond": "u & !u"}]}]}"#,
        );
        let f = explore(
            &s,
            &OracleConfig {
                mode: Mode::Semantic,
                ..Default::default()
            },
        );
        assert!(f.true_conditions.contains(&Site::Transition(0, 0)));
        assert!(!f.true_conditions.contains(&Site::Transition(0, 1)));
        assert!(f.reachable.contains(&GlobalStep::new(0, 1)));
    }

    #[test]
    fn activation_counts() {
        let s = spec(
            r#"{"name": "f5", "variables": [],
              "partials": [{"id": "G", "steps": [{"id": "1", "initial": true}, {"id": "2", "initial": true},
                  {"id": "3"}, {"id": "4"}, {"id": "5"}],
                "transitions": [{"id": "t1", "from": ["1"], "to": ["3", "4"]}, {"id": "t2", "from": ["2"], "to": ["3", "4"]},
                                {"id": "t3", "from": ["3"], "to": ["5"]}, {"id": "t4", "from": ["4"], "to": ["5"]}]}]}"#,
        );
        let f = explore(
            &s,
            &OracleConfig {
                count_activations: true,
                ..Default::default()
            },
        );
        assert_eq!(f.activations[&GlobalStep::new(0, 4)], 4);
        assert!(f.multiple.contains(&GlobalStep::new(0, 4)));
    }
}
