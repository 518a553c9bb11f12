//! Reachable steps and concurrent steps of a partial Grafcet, computed by a
//! worklist fixpoint that assumes every transition condition may hold.
//!
//! Internally a step may be concurrent to itself (it can hold activity
//! several times, e.g. behind a source transition or a split that later
//! rejoins). The published relation `S^C` is irreflexive; reflexive entries
//! are reported separately in [`ReachConcResult::self_concurrent`].

use std::collections::{BTreeSet, VecDeque};

use crate::hierarchy::{InitialSituation, SituationSource};
use crate::model::{GlobalStep, GrafcetSpec, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachConcResult {
    pub partial: usize,
    pub situation: InitialSituation,
    /// Sorted `S^R`.
    pub reachable: Vec<usize>,
    /// Sorted `S^C_s` per step, without `s` itself.
    pub concurrency: Vec<Vec<usize>>,
    /// Steps that may be active more than once at the same time.
    pub self_concurrent: Vec<usize>,
    /// Number of worklist dequeues until the fixpoint.
    pub iterations: usize,
}

impl ReachConcResult {
    pub fn is_reachable(&self, step: usize) -> bool {
        self.reachable.binary_search(&step).is_ok()
    }

    pub fn concurrent(&self, a: usize, b: usize) -> bool {
        if a == b {
            self.self_concurrent.binary_search(&a).is_ok()
        } else {
            self.concurrency[a].binary_search(&b).is_ok()
        }
    }
}

/// `S^C_s = S^I \ {s}` for `s ∈ S^I`, empty otherwise.
pub fn init_concurrency(step_count: usize, initial: &[usize]) -> Vec<BTreeSet<usize>> {
    let mut sc = vec![BTreeSet::new(); step_count];
    for &s in initial {
        sc[s] = initial.iter().copied().filter(|&x| x != s).collect();
    }
    sc
}

/// Mutable fixpoint state shared by the worklist loop and the update rule.
pub struct ConcState {
    pub sets: Vec<BTreeSet<usize>>,
    pub versions: Vec<u64>,
}

impl ConcState {
    pub fn new(sets: Vec<BTreeSet<usize>>) -> Self {
        let versions = vec![0; sets.len()];
        Self { sets, versions }
    }

    fn insert(&mut self, s: usize, x: usize) {
        if self.sets[s].insert(x) {
            self.versions[s] += 1;
        }
    }
}

/// Update rule for one downstream step `s` of a fired transition `t`:
/// `S^C_s ∪= (t• \ {s}) ∪ ⋂_{s' ∈ •t} S^C_{s'}`, then symmetric closure.
/// For a source transition the intersection is replaced by `source_seed`.
pub fn concurr_analysis(
    topo: &Topology,
    state: &mut ConcState,
    t: usize,
    s: usize,
    source_seed: &BTreeSet<usize>,
) {
    let pre = &topo.pre[t];
    let common: BTreeSet<usize> = match pre.split_first() {
        None => source_seed.clone(),
        Some((&first, rest)) => state.sets[first]
            .iter()
            .copied()
            .filter(|x| rest.iter().all(|&r| state.sets[r].contains(x)))
            .collect(),
    };
    for &x in &topo.post[t] {
        if x != s {
            state.insert(s, x);
        }
    }
    for x in common {
        state.insert(s, x);
    }
    let partners: Vec<usize> = state.sets[s].iter().copied().collect();
    for x in partners {
        state.insert(x, s);
    }
}

/// Upper bound on worklist dequeues: every transition is enqueued once
/// initially, once when an upstream step first becomes reachable and once per
/// growth of an upstream step's concurrency set (at most `|S| + 1` entries).
pub fn iteration_bound(topo: &Topology) -> usize {
    let n = topo.step_count;
    topo.transition_count() + topo.step_post.iter().map(|ts| ts.len() * (n + 3)).sum::<usize>()
}

/// FIFO queue holding each transition at most once.
struct Worklist {
    queue: VecDeque<usize>,
    pending: Vec<bool>,
}

impl Worklist {
    fn new(n: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            pending: vec![false; n],
        }
    }

    fn push(&mut self, t: usize) {
        if !self.pending[t] {
            self.pending[t] = true;
            self.queue.push_back(t);
        }
    }

    fn pop(&mut self, pick: &mut dyn FnMut(usize) -> usize) -> Option<usize> {
        if self.queue.is_empty() {
            return None;
        }
        let i = pick(self.queue.len()).min(self.queue.len() - 1);
        let t = self.queue.remove(i)?;
        self.pending[t] = false;
        Some(t)
    }
}

struct Fixpoint {
    reachable: Vec<bool>,
    state: ConcState,
    iterations: usize,
}

fn run_fixpoint(
    topo: &Topology,
    initial: &[usize],
    seed: Vec<BTreeSet<usize>>,
    source_seed: &BTreeSet<usize>,
    pick: &mut dyn FnMut(usize) -> usize,
) -> Fixpoint {
    let mut reachable = vec![false; topo.step_count];
    let mut work = Worklist::new(topo.transition_count());
    for &s in initial {
        reachable[s] = true;
        for &t in &topo.step_post[s] {
            work.push(t);
        }
    }
    for t in topo.source_transitions() {
        work.push(t);
    }
    let mut state = ConcState::new(seed);
    let mut iterations = 0;
    while let Some(t) = work.pop(pick) {
        iterations += 1;
        let snapshot = state.versions.clone();
        if topo.pre[t].iter().all(|&s| reachable[s]) {
            for &s in &topo.post[t] {
                if !reachable[s] {
                    reachable[s] = true;
                    for &u in &topo.step_post[s] {
                        work.push(u);
                    }
                }
                concurr_analysis(topo, &mut state, t, s, source_seed);
            }
        }
        for (s, &v) in snapshot.iter().enumerate() {
            if state.versions[s] != v {
                for &u in &topo.step_post[s] {
                    work.push(u);
                }
            }
        }
    }
    Fixpoint {
        reachable,
        state,
        iterations,
    }
}

fn finish(
    partial: usize,
    situation: &InitialSituation,
    fix: Fixpoint,
    extra_iterations: usize,
) -> ReachConcResult {
    let reachable = (0..fix.reachable.len()).filter(|&s| fix.reachable[s]).collect();
    let mut self_concurrent = Vec::new();
    let concurrency = fix
        .state
        .sets
        .iter()
        .enumerate()
        .map(|(s, set)| {
            if set.contains(&s) {
                self_concurrent.push(s);
            }
            set.iter().copied().filter(|&x| x != s).collect()
        })
        .collect();
    ReachConcResult {
        partial,
        situation: situation.clone(),
        reachable,
        concurrency,
        self_concurrent,
        iterations: fix.iterations + extra_iterations,
    }
}

/// Reachability and concurrency for one initial situation, with a FIFO
/// worklist. Includes the source-transition pass.
pub fn reach_analysis(topo: &Topology, situation: &InitialSituation) -> ReachConcResult {
    reach_analysis_scheduled(topo, situation, &mut |_| 0)
}

/// Like [`reach_analysis`], but `pick(len)` chooses which pending transition
/// is processed next (an index below `len`).
pub fn reach_analysis_scheduled(
    topo: &Topology,
    situation: &InitialSituation,
    pick: &mut dyn FnMut(usize) -> usize,
) -> ReachConcResult {
    let first = first_pass(topo, situation, pick);
    source_transition_pass(topo, situation, first, pick)
}

/// The plain fixpoint, with an empty intersection term for source
/// transitions.
pub fn first_pass(
    topo: &Topology,
    situation: &InitialSituation,
    pick: &mut dyn FnMut(usize) -> usize,
) -> ReachConcResult {
    let seed = init_concurrency(topo.step_count, &situation.steps);
    let fix = run_fixpoint(topo, &situation.steps, seed, &BTreeSet::new(), pick);
    finish(situation.partial, situation, fix, 0)
}

/// Second pass for partial Grafcets with source transitions: a source may
/// fire at any time, so its downstream steps are concurrent to every step
/// reachable in the first pass (including themselves). Identity otherwise.
pub fn source_transition_pass(
    topo: &Topology,
    situation: &InitialSituation,
    first: ReachConcResult,
    pick: &mut dyn FnMut(usize) -> usize,
) -> ReachConcResult {
    if topo.source_transitions().next().is_none() {
        return first;
    }
    let all: BTreeSet<usize> = first.reachable.iter().copied().collect();
    let mut seed = init_concurrency(topo.step_count, &situation.steps);
    for t in topo.source_transitions() {
        for &s in &topo.post[t] {
            for &r in &all {
                seed[s].insert(r);
                seed[r].insert(s);
            }
            seed[s].insert(s);
        }
    }
    let fix = run_fixpoint(topo, &situation.steps, seed, &all, pick);
    finish(situation.partial, situation, fix, first.iterations)
}

/// Least set containing `seed` and closed under firing (every transition
/// whose upstream steps are all in the set adds its downstream steps).
pub fn reach_closure(topo: &Topology, seed: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut reach = vec![false; topo.step_count];
    for s in seed {
        reach[s] = true;
    }
    loop {
        let mut changed = false;
        for t in 0..topo.transition_count() {
            if topo.pre[t].iter().all(|&s| reach[s]) {
                for &s in &topo.post[t] {
                    if !reach[s] {
                        reach[s] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return reach;
        }
    }
}

/// What opens an entry point into a partial Grafcet, for the lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activator {
    /// Initial steps or a forcing order; the partial then runs on its own.
    Root,
    /// An enclosing step; the partial dies when the step is left.
    Step(GlobalStep),
}

fn activator(source: &SituationSource) -> Activator {
    match source {
        SituationSource::Enclosing { .. } => Activator::Step(source.activator().expect("enclosing")),
        SituationSource::InitialSteps | SituationSource::Forcing { .. } => Activator::Root,
    }
}

/// Spec-wide concurrency over steps of all partial Grafcets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GlobalConcurrency {
    /// Per partial Grafcet, per step.
    pub reachable: Vec<Vec<bool>>,
    /// Per partial Grafcet, per initial situation: whether its activator
    /// can ever be active.
    pub live: Vec<Vec<bool>>,
    /// Partial Grafcets that can be entered again while still active; all
    /// their reachable steps are treated as mutually concurrent.
    pub reentrant: Vec<bool>,
    /// Unordered pairs `(a, b)` with `a < b`.
    pub pairs: BTreeSet<(GlobalStep, GlobalStep)>,
    pub self_concurrent: BTreeSet<GlobalStep>,
}

impl GlobalConcurrency {
    pub fn is_reachable(&self, g: GlobalStep) -> bool {
        self.reachable[g.partial][g.step]
    }

    pub fn concurrent(&self, a: GlobalStep, b: GlobalStep) -> bool {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => self.pairs.contains(&(a, b)),
            std::cmp::Ordering::Greater => self.pairs.contains(&(b, a)),
            std::cmp::Ordering::Equal => self.self_concurrent.contains(&a),
        }
    }

    /// Steps concurrent to `a`, excluding `a`.
    pub fn partners(&self, a: GlobalStep) -> Vec<GlobalStep> {
        let mut v: Vec<GlobalStep> = self
            .pairs
            .iter()
            .filter_map(|&(x, y)| {
                if x == a {
                    Some(y)
                } else if y == a {
                    Some(x)
                } else {
                    None
                }
            })
            .collect();
        v.sort_unstable();
        v
    }

    fn add(&mut self, a: GlobalStep, b: GlobalStep) -> bool {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => self.pairs.insert((a, b)),
            std::cmp::Ordering::Greater => self.pairs.insert((b, a)),
            std::cmp::Ordering::Equal => self.self_concurrent.insert(a),
        }
    }

    fn steps_of(&self, partial: usize) -> Vec<GlobalStep> {
        self.reachable[partial]
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(s, _)| GlobalStep::new(partial, s))
            .collect()
    }
}

/// `out[a][b]`: `b` is `a` or lies below `a` through enclosing edges only.
fn enclosed_closure(spec: &GrafcetSpec) -> Vec<Vec<bool>> {
    let np = spec.partials.len();
    let children: Vec<Vec<usize>> = spec
        .partials
        .iter()
        .map(|p| p.enclosings.iter().filter_map(|e| spec.partial_position(&e.target)).collect())
        .collect();
    (0..np)
        .map(|a| {
            let mut seen = vec![false; np];
            let mut stack = vec![a];
            while let Some(p) = stack.pop() {
                if !std::mem::replace(&mut seen[p], true) {
                    stack.extend(&children[p]);
                }
            }
            seen
        })
        .collect()
}

/// Lifts per-situation results to a spec-wide relation.
///
/// Rules, iterated to a fixpoint:
/// - intra-partial pairs of every live situation;
/// - partial Grafcets running on their own (initial steps, forced) are
///   mutually concurrent;
/// - two partial Grafcets activated by the same or by concurrent enclosing
///   steps are concurrent, unless one is nested inside the other;
/// - every step concurrent to an enclosing step, and the enclosing step
///   itself, is concurrent to every reachable step of the enclosed partial,
///   except steps of partials nested inside it by enclosing, which die with
///   it and get their pairs from their own enclosing steps;
/// - a partial Grafcet that can be re-entered while active has all its
///   reachable steps mutually concurrent, and its reachable set is closed
///   under firing from the union of its entry points.
pub fn lift_hierarchy_concurrency(
    spec: &GrafcetSpec,
    topologies: &[Topology],
    results: &[Vec<ReachConcResult>],
) -> GlobalConcurrency {
    let np = spec.partials.len();
    let nested = enclosed_closure(spec);
    let mut g = GlobalConcurrency {
        reachable: topologies.iter().map(|t| vec![false; t.step_count]).collect(),
        live: results.iter().map(|r| vec![false; r.len()]).collect(),
        reentrant: vec![false; np],
        ..Default::default()
    };
    loop {
        let before = (g.reachable.clone(), g.live.clone(), g.pairs.len(), g.self_concurrent.len());

        for p in 0..np {
            for (i, r) in results[p].iter().enumerate() {
                let live = match r.situation.source.activator() {
                    None => true,
                    Some(e) => g.is_reachable(e),
                };
                if !live {
                    continue;
                }
                g.live[p][i] = true;
                for &s in &r.reachable {
                    g.reachable[p][s] = true;
                }
                for (s, cs) in r.concurrency.iter().enumerate() {
                    for &x in cs {
                        g.add(GlobalStep::new(p, s), GlobalStep::new(p, x));
                    }
                }
                for &s in &r.self_concurrent {
                    g.add(GlobalStep::new(p, s), GlobalStep::new(p, s));
                }
            }
        }

        let activators: Vec<Vec<Activator>> = (0..np)
            .map(|p| {
                let mut v: Vec<Activator> = results[p]
                    .iter()
                    .zip(&g.live[p])
                    .filter(|(_, &l)| l)
                    .map(|(r, _)| activator(&r.situation.source))
                    .collect();
                v.dedup();
                v
            })
            .collect();

        for p in 0..np {
            let acts = &activators[p];
            let reentrant = acts.iter().any(|a| match a {
                Activator::Root => false,
                Activator::Step(e) => {
                    g.concurrent(*e, *e)
                        || acts.iter().any(|b| match b {
                            Activator::Root => true,
                            Activator::Step(f) => f != e && g.concurrent(*e, *f),
                        })
                }
            });
            if reentrant {
                g.reentrant[p] = true;
            }
            if g.reentrant[p] {
                let closed = reach_closure(
                    &topologies[p],
                    (0..topologies[p].step_count).filter(|&s| g.reachable[p][s]),
                );
                g.reachable[p] = closed;
                let steps = g.steps_of(p);
                for &a in &steps {
                    for &b in &steps {
                        g.add(a, b);
                    }
                }
            }
        }

        let roots: Vec<usize> = (0..np)
            .filter(|&p| activators[p].contains(&Activator::Root))
            .collect();
        for (i, &a) in roots.iter().enumerate() {
            for &b in &roots[i + 1..] {
                for x in g.steps_of(a) {
                    for y in g.steps_of(b) {
                        g.add(x, y);
                    }
                }
            }
        }

        let enclosed: Vec<(usize, GlobalStep)> = (0..np)
            .flat_map(|p| {
                activators[p].iter().filter_map(move |a| match a {
                    Activator::Step(e) => Some((p, *e)),
                    Activator::Root => None,
                })
            })
            .collect();
        for (i, &(a, e)) in enclosed.iter().enumerate() {
            for &(b, f) in &enclosed[i + 1..] {
                if a != b && !nested[a][b] && !nested[b][a] && (e == f || g.concurrent(e, f)) {
                    for x in g.steps_of(a) {
                        for y in g.steps_of(b) {
                            g.add(x, y);
                        }
                    }
                }
            }
        }
        for &(a, e) in &enclosed {
            let mut around = g.partners(e);
            around.push(e);
            around.retain(|y| !nested[a][y.partial]);
            for x in g.steps_of(a) {
                for &y in &around {
                    if y != x {
                        g.add(x, y);
                    }
                }
            }
        }

        let after = (g.reachable.clone(), g.live.clone(), g.pairs.len(), g.self_concurrent.len());
        if before == after {
            return g;
        }
    }
}
