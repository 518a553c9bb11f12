//! Reported flaws.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    InvalidModel,
    HierarchyCycle,
    DeadPartial,
    UnreachableStep,
    UnboundedActivation,
    Race,
    UnsatCondition,
    AlwaysTrueCondition,
    AnalysisIncomplete,
    QueryViolation,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::InvalidModel => "invalid-model",
            FindingKind::HierarchyCycle => "hierarchy-cycle",
            FindingKind::DeadPartial => "dead-partial",
            FindingKind::UnreachableStep => "unreachable-step",
            FindingKind::UnboundedActivation => "unbounded-activation",
            FindingKind::Race => "race",
            FindingKind::UnsatCondition => "unsat-condition",
            FindingKind::AlwaysTrueCondition => "always-true-condition",
            FindingKind::AnalysisIncomplete => "analysis-incomplete",
            FindingKind::QueryViolation => "query-violation",
        }
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", content = "id", rename_all = "lowercase")]
pub enum Element {
    Step(String),
    Transition(String),
    Action(String),
    Variable(String),
    Query(String),
    Spec(String),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Step(s) => write!(f, "step {s}"),
            Element::Transition(t) => write!(f, "transition {t}"),
            Element::Action(a) => write!(f, "action {a}"),
            Element::Variable(v) => write!(f, "variable {v}"),
            Element::Query(q) => write!(f, "query {q}"),
            Element::Spec(s) => write!(f, "spec {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Location {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<Element>,
    /// Second element for pairwise findings such as races.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub related: Option<Element>,
}

impl Location {
    pub fn spec() -> Self {
        Self {
            partial: None,
            element: None,
            related: None,
        }
    }

    pub fn partial(id: &str) -> Self {
        Self {
            partial: Some(id.to_owned()),
            element: None,
            related: None,
        }
    }

    pub fn in_partial(id: &str, element: Element) -> Self {
        Self {
            partial: Some(id.to_owned()),
            element: Some(element),
            related: None,
        }
    }

    pub fn global(element: Element) -> Self {
        Self {
            partial: None,
            element: Some(element),
            related: None,
        }
    }

    pub fn with_related(mut self, related: Element) -> Self {
        self.related = Some(related);
        self
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(p) = &self.partial {
            parts.push(format!("partial {p}"));
        }
        if let Some(e) = &self.element {
            parts.push(e.to_string());
        }
        if let Some(r) = &self.related {
            parts.push(format!("and {r}"));
        }
        if parts.is_empty() {
            f.write_str("spec")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub id: String,
    pub kind: FindingKind,
    pub severity: Severity,
    pub location: Location,
    pub message: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub evidence: BTreeMap<String, serde_json::Value>,
}

impl Finding {
    pub fn new(
        kind: FindingKind,
        severity: Severity,
        location: Location,
        message: impl Into<String>,
    ) -> Self {
        let message = message.into();
        let id = stable_id(kind, &location, &message);
        Self {
            id,
            kind,
            severity,
            location,
            message,
            evidence: BTreeMap::new(),
        }
    }

    pub fn with_evidence(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.evidence.insert(key.to_owned(), value);
        self
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}] {}: {}",
            self.severity, self.kind, self.location, self.message
        )
    }
}

fn stable_id(kind: FindingKind, location: &Location, message: &str) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    h.update([0]);
    h.update(location.to_string().as_bytes());
    h.update([0]);
    h.update(message.as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Sorts findings into the canonical report order.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        (a.kind, &a.location, &a.message, &a.id).cmp(&(b.kind, &b.location, &b.message, &b.id))
    });
}

pub fn max_severity(findings: &[Finding]) -> Option<Severity> {
    findings.iter().map(|f| f.severity).max()
}
