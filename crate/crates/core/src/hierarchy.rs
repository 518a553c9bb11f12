//! Hierarchical dependencies between partial Grafcets and the initial
//! situations they induce.
//!
//! Enclosing steps and forcing orders relate a superior partial Grafcet to an
//! inferior one. The relation must be a partial order; every edge then yields
//! one entry point (initial situation) into its target.

use serde::Serialize;

use crate::finding::{Finding, FindingKind, Location, Severity};
use crate::model::{Action, ForcedSituation, GlobalStep, GrafcetSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeKind {
    Enclosing,
    Forcing(ForcedSituation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyEdge {
    /// Enclosing or forcing step in the superior partial Grafcet.
    pub from: GlobalStep,
    /// Index of the inferior partial Grafcet.
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<HierarchyEdge>,
}

impl HierarchyGraph {
    pub fn incoming(&self, partial: usize) -> impl Iterator<Item = &HierarchyEdge> {
        self.edges.iter().filter(move |e| e.to == partial)
    }

    pub fn successors(&self, partial: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.from.partial == partial)
            .map(|e| e.to)
    }

    /// Returns one cycle (as partial indices, first node repeated at the end)
    /// if the graph is not acyclic.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        fn dfs(
            g: &HierarchyGraph,
            n: usize,
            marks: &mut [Mark],
            path: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            marks[n] = Mark::Open;
            path.push(n);
            let mut succ: Vec<usize> = g.successors(n).collect();
            succ.sort_unstable();
            succ.dedup();
            for m in succ {
                match marks[m] {
                    Mark::Open => {
                        let start = path.iter().position(|&x| x == m).unwrap_or(0);
                        let mut cycle = path[start..].to_vec();
                        cycle.push(m);
                        return Some(cycle);
                    }
                    Mark::New => {
                        if let Some(c) = dfs(g, m, marks, path) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            path.pop();
            marks[n] = Mark::Done;
            None
        }
        let mut marks = vec![Mark::New; self.nodes.len()];
        for n in 0..self.nodes.len() {
            if marks[n] == Mark::New {
                if let Some(c) = dfs(self, n, &mut marks, &mut Vec::new()) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Superiors before inferiors; ties broken by declaration order.
    /// `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            indegree[e.to] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for e in self.edges.iter().filter(|e| e.from.partial == i) {
                indegree[e.to] -= 1;
                if indegree[e.to] == 0 {
                    ready.insert(e.to);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// One edge per enclosing pair and per forcing order. A cycle is reported
/// as a `hierarchy-cycle` finding.
pub fn build_hierarchy(spec: &GrafcetSpec) -> (HierarchyGraph, Vec<Finding>) {
    let mut edges = Vec::new();
    for (pi, p) in spec.partials.iter().enumerate() {
        for e in &p.enclosings {
            if let (Some(s), Some(to)) = (p.step_position(&e.step), spec.partial_position(&e.target)) {
                edges.push(HierarchyEdge {
                    from: GlobalStep::new(pi, s),
                    to,
                    kind: EdgeKind::Enclosing,
                });
            }
        }
        for a in &p.actions {
            if let Action::Forcing {
                step,
                target,
                situation,
            } = a
            {
                if let (Some(s), Some(to)) = (p.step_position(step), spec.partial_position(target)) {
                    edges.push(HierarchyEdge {
                        from: GlobalStep::new(pi, s),
                        to,
                        kind: EdgeKind::Forcing(situation.clone()),
                    });
                }
            }
        }
    }
    let graph = HierarchyGraph {
        nodes: spec.partials.iter().map(|p| p.id.clone()).collect(),
        edges,
    };
    let mut findings = Vec::new();
    if let Some(cycle) = graph.find_cycle() {
        let names: Vec<&str> = cycle.iter().map(|&i| graph.nodes[i].as_str()).collect();
        findings.push(
            Finding::new(
                FindingKind::HierarchyCycle,
                Severity::Error,
                Location::partial(names[0]),
                format!("hierarchy not a partial order: {}", names.join(" -> ")),
            )
            .with_evidence("cycle", &names),
        );
    }
    (graph, findings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SituationSource {
    InitialSteps,
    Enclosing { from: GlobalStepName },
    Forcing { from: GlobalStepName, init: bool },
}

/// Serializable wrapper; names are resolved by the report layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GlobalStepName {
    pub partial: usize,
    pub step: usize,
}

impl From<GlobalStep> for GlobalStepName {
    fn from(g: GlobalStep) -> Self {
        Self {
            partial: g.partial,
            step: g.step,
        }
    }
}

impl SituationSource {
    /// The step whose activity opens this entry point, if any.
    pub fn activator(&self) -> Option<GlobalStep> {
        match self {
            SituationSource::InitialSteps => None,
            SituationSource::Enclosing { from } | SituationSource::Forcing { from, .. } => {
                Some(GlobalStep::new(from.partial, from.step))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialSituation {
    pub partial: usize,
    pub source: SituationSource,
    /// Sorted step indices `S^I`.
    pub steps: Vec<usize>,
}

fn sorted_steps(iter: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = iter.collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Every entry point of partial Grafcet `partial`:
/// its initial steps, the marked steps once per incoming enclosing, and the
/// forced situation once per incoming forcing (`init` forcing contributes the
/// initial steps, `*` contributes nothing).
///
/// A partial Grafcet without initial steps and without incoming edges whose
/// only entry points are source transitions gets an empty `InitialSteps`
/// situation.
pub fn initial_situations(
    spec: &GrafcetSpec,
    graph: &HierarchyGraph,
    partial: usize,
) -> Vec<InitialSituation> {
    let p = &spec.partials[partial];
    let initial = sorted_steps(p.steps.iter().enumerate().filter(|(_, s)| s.initial).map(|(i, _)| i));
    let marked = sorted_steps(p.steps.iter().enumerate().filter(|(_, s)| s.marked).map(|(i, _)| i));
    let mut out = Vec::new();
    let has_incoming = graph.incoming(partial).next().is_some();
    if !initial.is_empty() || (!has_incoming && p.has_source_transitions()) {
        out.push(InitialSituation {
            partial,
            source: SituationSource::InitialSteps,
            steps: initial.clone(),
        });
    }
    for e in graph.incoming(partial) {
        let (source, steps) = match &e.kind {
            EdgeKind::Enclosing => (
                SituationSource::Enclosing { from: e.from.into() },
                marked.clone(),
            ),
            EdgeKind::Forcing(ForcedSituation::Steps(names)) => (
                SituationSource::Forcing {
                    from: e.from.into(),
                    init: false,
                },
                sorted_steps(names.iter().filter_map(|n| p.step_position(n))),
            ),
            EdgeKind::Forcing(ForcedSituation::Init) => (
                SituationSource::Forcing {
                    from: e.from.into(),
                    init: true,
                },
                initial.clone(),
            ),
            EdgeKind::Forcing(ForcedSituation::Current) => continue,
        };
        out.push(InitialSituation {
            partial,
            source,
            steps,
        });
    }
    out
}

/// `dead-partial` warnings for partial Grafcets without any entry point.
pub fn dead_partials(spec: &GrafcetSpec, situations: &[Vec<InitialSituation>]) -> Vec<Finding> {
    spec.partials
        .iter()
        .zip(situations)
        .filter(|(_, s)| s.is_empty())
        .map(|(p, _)| {
            Finding::new(
                FindingKind::DeadPartial,
                Severity::Warning,
                Location::partial(&p.id),
                format!("partial Grafcet `{}` has no initial situation and can never become active", p.id),
            )
        })
        .collect()
}

/// Human-readable description of a situation source.
pub fn describe_source(spec: &GrafcetSpec, source: &SituationSource) -> String {
    match source {
        SituationSource::InitialSteps => "initial steps".to_owned(),
        SituationSource::Enclosing { from } => {
            format!("enclosing step {}", spec.step_name(GlobalStep::new(from.partial, from.step)))
        }
        SituationSource::Forcing { from, init } => format!(
            "forcing{} from step {}",
            if *init { " (init)" } else { "" },
            spec.step_name(GlobalStep::new(from.partial, from.step))
        ),
    }
}
