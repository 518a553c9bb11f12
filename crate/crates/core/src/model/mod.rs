//! In-memory model of a GRAFCET specification.
//!
//! A [`GrafcetSpec`] holds the global variable declarations and an ordered
//! list of partial Grafcets. Every element refers to others by identifier;
//! [`Topology`] provides the index-based view the analyses work on.

mod condition;
mod validate;

pub use condition::{BoolRef, CmpOp, Condition, StepRef, Sum, SumTerm, Term, TypeEnv, ValueExpr};
pub use validate::validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Input,
    Internal,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Bool,
    Int,
}

impl fmt::Display for VarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarType::Bool => f.write_str("bool"),
            VarType::Int => f.write_str("int"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VarKind,
    pub ty: VarType,
    /// Initial value; `None` for inputs, which are unconstrained.
    pub init: Option<i64>,
}

impl VariableDecl {
    /// Initial value used by the analyses (0 when not declared).
    pub fn init_value(&self) -> i64 {
        self.init.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub id: String,
    pub initial: bool,
    pub marked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosing {
    pub step: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub upstream: Vec<String>,
    pub downstream: Vec<String>,
    pub condition: Condition,
}

impl Transition {
    pub fn is_source(&self) -> bool {
        self.upstream.is_empty()
    }

    pub fn is_sink(&self) -> bool {
        self.downstream.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Activation,
    Deactivation,
    During,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForcedSituation {
    Steps(Vec<String>),
    /// `*`: freeze the current situation.
    Current,
    /// Reset to the initial situation.
    Init,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Continuous {
        step: String,
        var: String,
        condition: Condition,
    },
    Stored {
        step: String,
        var: String,
        value: ValueExpr,
        trigger: Trigger,
        condition: Condition,
    },
    Forcing {
        step: String,
        target: String,
        situation: ForcedSituation,
    },
}

impl Action {
    pub fn step(&self) -> &str {
        match self {
            Action::Continuous { step, .. }
            | Action::Stored { step, .. }
            | Action::Forcing { step, .. } => step,
        }
    }

    /// Variable written by the action, if any.
    pub fn written_var(&self) -> Option<&str> {
        match self {
            Action::Continuous { var, .. } | Action::Stored { var, .. } => Some(var),
            Action::Forcing { .. } => None,
        }
    }

    pub fn condition(&self) -> Option<&Condition> {
        match self {
            Action::Continuous { condition, .. } | Action::Stored { condition, .. } => {
                Some(condition)
            }
            Action::Forcing { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialGrafcet {
    pub id: String,
    pub steps: Vec<Step>,
    pub enclosings: Vec<Enclosing>,
    pub transitions: Vec<Transition>,
    pub actions: Vec<Action>,
}

impl PartialGrafcet {
    pub fn step_position(&self, id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.id == id)
    }

    pub fn initial_steps(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.initial)
    }

    pub fn marked_steps(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.marked)
    }

    /// A partial Grafcet is enclosed iff it has marked steps.
    pub fn is_enclosed(&self) -> bool {
        self.steps.iter().any(|s| s.marked)
    }

    pub fn has_source_transitions(&self) -> bool {
        self.transitions.iter().any(Transition::is_source)
    }

    /// Stable identifier of the `index`-th action of this partial Grafcet.
    pub fn action_id(&self, index: usize) -> String {
        format!("{}#{}", self.id, index)
    }

    /// Index-based view. Unknown step names are skipped, so callers should
    /// only rely on it for validated models.
    pub fn topology(&self) -> Topology {
        Topology::new(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryKind {
    NeverConcurrent { a: StepRef, b: StepRef },
    NeverCoactive { a: (String, i64), b: (String, i64) },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyQuery {
    pub name: String,
    pub kind: QueryKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrafcetSpec {
    pub name: String,
    pub variables: Vec<VariableDecl>,
    pub partials: Vec<PartialGrafcet>,
    pub queries: Vec<SafetyQuery>,
}

impl GrafcetSpec {
    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variables_of(&self, kind: VarKind) -> impl Iterator<Item = &VariableDecl> {
        self.variables.iter().filter(move |v| v.kind == kind)
    }

    pub fn partial(&self, id: &str) -> Option<&PartialGrafcet> {
        self.partials.iter().find(|p| p.id == id)
    }

    pub fn partial_position(&self, id: &str) -> Option<usize> {
        self.partials.iter().position(|p| p.id == id)
    }

    /// Resolves a step reference to `(partial index, step index)`.
    pub fn resolve_step(&self, r: &StepRef) -> Option<GlobalStep> {
        let p = self.partial_position(&r.partial)?;
        let s = self.partials[p].step_position(&r.step)?;
        Some(GlobalStep { partial: p, step: s })
    }

    pub fn step_name(&self, g: GlobalStep) -> String {
        let p = &self.partials[g.partial];
        format!("{}.{}", p.id, p.steps[g.step].id)
    }

    pub fn types(&self) -> BTreeMap<String, VarType> {
        self.variables.iter().map(|v| (v.name.clone(), v.ty)).collect()
    }
}

/// A step addressed by partial index and step index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalStep {
    pub partial: usize,
    pub step: usize,
}

impl GlobalStep {
    pub fn new(partial: usize, step: usize) -> Self {
        Self { partial, step }
    }
}

/// Index-based flow relation of one partial Grafcet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub step_count: usize,
    /// `•t` per transition.
    pub pre: Vec<Vec<usize>>,
    /// `t•` per transition.
    pub post: Vec<Vec<usize>>,
    /// `•s` per step.
    pub step_pre: Vec<Vec<usize>>,
    /// `s•` per step.
    pub step_post: Vec<Vec<usize>>,
}

impl Topology {
    fn new(p: &PartialGrafcet) -> Self {
        let index = |names: &[String]| -> Vec<usize> {
            let mut v: Vec<usize> = names.iter().filter_map(|n| p.step_position(n)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let pre: Vec<Vec<usize>> = p.transitions.iter().map(|t| index(&t.upstream)).collect();
        let post: Vec<Vec<usize>> = p.transitions.iter().map(|t| index(&t.downstream)).collect();
        Self::from_arcs(p.steps.len(), pre, post)
    }

    pub fn from_arcs(step_count: usize, pre: Vec<Vec<usize>>, post: Vec<Vec<usize>>) -> Self {
        let mut step_pre = vec![Vec::new(); step_count];
        let mut step_post = vec![Vec::new(); step_count];
        for (t, ups) in pre.iter().enumerate() {
            for &s in ups {
                step_post[s].push(t);
            }
        }
        for (t, downs) in post.iter().enumerate() {
            for &s in downs {
                step_pre[s].push(t);
            }
        }
        Self {
            step_count,
            pre,
            post,
            step_pre,
            step_post,
        }
    }

    pub fn transition_count(&self) -> usize {
        self.pre.len()
    }

    pub fn source_transitions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.pre.len()).filter(|&t| self.pre[t].is_empty())
    }
}
