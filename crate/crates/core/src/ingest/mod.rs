//! Reading and writing `.grafcet.json` documents.

mod parser;

pub use parser::{parse_condition, parse_condition_typed, parse_sum, parse_value, ExprError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finding::{Finding, Severity};
use crate::model::{
    validate, Action, Condition, Enclosing, ForcedSituation, GrafcetSpec, PartialGrafcet,
    QueryKind, SafetyQuery, Step, StepRef, Transition, Trigger, VarKind, VarType, VariableDecl,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid specification ({} error(s)): {}", .0.len(), first_message(.0))]
    Semantic(Vec<Finding>),
}

fn first_message(findings: &[Finding]) -> String {
    findings.first().map(|f| f.to_string()).unwrap_or_default()
}

impl From<serde_json::Error> for IngestError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => IngestError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            Category::Data => IngestError::Schema(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocSpec {
    name: String,
    variables: Vec<DocVariable>,
    partials: Vec<DocPartial>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    queries: Vec<DocQuery>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocVariable {
    name: String,
    kind: VarKind,
    #[serde(rename = "type")]
    ty: VarType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocPartial {
    id: String,
    steps: Vec<DocStep>,
    #[serde(default)]
    enclosings: Vec<DocEnclosing>,
    #[serde(default)]
    transitions: Vec<DocTransition>,
    #[serde(default)]
    actions: Vec<DocAction>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocStep {
    id: String,
    #[serde(default, skip_serializing_if = "is_false")]
    initial: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    marked: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocEnclosing {
    step: String,
    target: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocTransition {
    id: String,
    from: Vec<String>,
    to: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cond: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DocAction {
    Continuous {
        step: String,
        var: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cond: Option<String>,
    },
    Stored {
        step: String,
        var: String,
        value: String,
        trigger: Trigger,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cond: Option<String>,
    },
    Forcing {
        step: String,
        target: String,
        situation: DocSituation,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DocSituation {
    Steps(Vec<String>),
    Keyword(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum DocQuery {
    NeverConcurrent {
        name: String,
        a: String,
        b: String,
    },
    NeverCoactive {
        name: String,
        a: DocLiteral,
        b: DocLiteral,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocLiteral {
    var: String,
    value: DocValue,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DocValue {
    Bool(bool),
    Int(i64),
}

/// Sidecar query file: `{"queries": [...]}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocQueryFile {
    queries: Vec<DocQuery>,
}

fn cond_from_doc(text: &Option<String>, what: &str) -> Result<Condition, IngestError> {
    match text {
        None => Ok(Condition::Const(true)),
        Some(t) => parse_condition(t).map_err(|e| IngestError::Schema(format!("{what}: {e}"))),
    }
}

fn cond_to_doc(c: &Condition) -> Option<String> {
    (!c.is_trivially_true()).then(|| c.to_string())
}

fn query_from_doc(q: DocQuery) -> Result<SafetyQuery, IngestError> {
    let lit = |l: DocLiteral| {
        let v = match l.value {
            DocValue::Bool(b) => i64::from(b),
            DocValue::Int(i) => i,
        };
        (l.var, v)
    };
    let step = |name: &str, text: &str| {
        StepRef::parse_dotted(text).ok_or_else(|| {
            IngestError::Schema(format!(
                "query `{name}`: `{text}` is not a `partial.step` reference"
            ))
        })
    };
    Ok(match q {
        DocQuery::NeverConcurrent { name, a, b } => SafetyQuery {
            kind: QueryKind::NeverConcurrent {
                a: step(&name, &a)?,
                b: step(&name, &b)?,
            },
            name,
        },
        DocQuery::NeverCoactive { name, a, b } => SafetyQuery {
            name,
            kind: QueryKind::NeverCoactive {
                a: lit(a),
                b: lit(b),
            },
        },
    })
}

fn query_to_doc(q: &SafetyQuery, spec: &GrafcetSpec) -> DocQuery {
    let lit = |(var, v): &(String, i64)| DocLiteral {
        var: var.clone(),
        value: match spec.variable(var).map(|d| d.ty) {
            Some(VarType::Bool) if (0..=1).contains(v) => DocValue::Bool(*v == 1),
            _ => DocValue::Int(*v),
        },
    };
    match &q.kind {
        QueryKind::NeverConcurrent { a, b } => DocQuery::NeverConcurrent {
            name: q.name.clone(),
            a: format!("{}.{}", a.partial, a.step),
            b: format!("{}.{}", b.partial, b.step),
        },
        QueryKind::NeverCoactive { a, b } => DocQuery::NeverCoactive {
            name: q.name.clone(),
            a: lit(a),
            b: lit(b),
        },
    }
}

fn spec_from_doc(doc: DocSpec) -> Result<GrafcetSpec, IngestError> {
    if doc.partials.is_empty() {
        return Err(IngestError::Schema(
            "`partials` must contain at least one partial Grafcet".into(),
        ));
    }
    let variables: Vec<VariableDecl> = doc
        .variables
        .into_iter()
        .map(|v| VariableDecl {
            name: v.name,
            kind: v.kind,
            ty: v.ty,
            init: v.init,
        })
        .collect();
    let var_type = |name: &str| variables.iter().find(|v| v.name == name).map(|v| v.ty);

    let mut partials = Vec::with_capacity(doc.partials.len());
    for p in doc.partials {
        let steps = p
            .steps
            .into_iter()
            .map(|s| Step {
                id: s.id,
                initial: s.initial,
                marked: s.marked,
            })
            .collect();
        let enclosings = p
            .enclosings
            .into_iter()
            .map(|e| Enclosing {
                step: e.step,
                target: e.target,
            })
            .collect();
        let mut transitions = Vec::new();
        for t in p.transitions {
            let condition = cond_from_doc(&t.cond, &format!("transition `{}.{}`", p.id, t.id))?;
            transitions.push(Transition {
                id: t.id,
                upstream: t.from,
                downstream: t.to,
                condition,
            });
        }
        let mut actions = Vec::new();
        for (i, a) in p.actions.into_iter().enumerate() {
            let what = format!("action `{}#{}`", p.id, i);
            actions.push(match a {
                DocAction::Continuous { step, var, cond } => Action::Continuous {
                    step,
                    condition: cond_from_doc(&cond, &what)?,
                    var,
                },
                DocAction::Stored {
                    step,
                    var,
                    value,
                    trigger,
                    cond,
                } => Action::Stored {
                    value: parse_value(&value, var_type(&var))
                        .map_err(|e| IngestError::Schema(format!("{what} value: {e}")))?,
                    condition: cond_from_doc(&cond, &what)?,
                    step,
                    var,
                    trigger,
                },
                DocAction::Forcing {
                    step,
                    target,
                    situation,
                } => Action::Forcing {
                    step,
                    target,
                    situation: match situation {
                        DocSituation::Steps(s) => ForcedSituation::Steps(s),
                        DocSituation::Keyword(k) if k == "*" => ForcedSituation::Current,
                        DocSituation::Keyword(k) if k == "init" => ForcedSituation::Init,
                        DocSituation::Keyword(k) => {
                            return Err(IngestError::Schema(format!(
                                "{what}: forcing situation must be a step list, \"*\" or \"init\", found \"{k}\""
                            )))
                        }
                    },
                },
            });
        }
        partials.push(PartialGrafcet {
            id: p.id,
            steps,
            enclosings,
            transitions,
            actions,
        });
    }
    let queries = doc
        .queries
        .into_iter()
        .map(query_from_doc)
        .collect::<Result<_, _>>()?;
    Ok(GrafcetSpec {
        name: doc.name,
        variables,
        partials,
        queries,
    })
}

fn spec_to_doc(spec: &GrafcetSpec) -> DocSpec {
    DocSpec {
        name: spec.name.clone(),
        variables: spec
            .variables
            .iter()
            .map(|v| DocVariable {
                name: v.name.clone(),
                kind: v.kind,
                ty: v.ty,
                init: v.init,
            })
            .collect(),
        partials: spec
            .partials
            .iter()
            .map(|p| DocPartial {
                id: p.id.clone(),
                steps: p
                    .steps
                    .iter()
                    .map(|s| DocStep {
                        id: s.id.clone(),
                        initial: s.initial,
                        marked: s.marked,
                    })
                    .collect(),
                enclosings: p
                    .enclosings
                    .iter()
                    .map(|e| DocEnclosing {
                        step: e.step.clone(),
                        target: e.target.clone(),
                    })
                    .collect(),
                transitions: p
                    .transitions
                    .iter()
                    .map(|t| DocTransition {
                        id: t.id.clone(),
                        from: t.upstream.clone(),
                        to: t.downstream.clone(),
                        cond: cond_to_doc(&t.condition),
                    })
                    .collect(),
                actions: p
                    .actions
                    .iter()
                    .map(|a| match a {
                        Action::Continuous {
                            step,
                            var,
                            condition,
                        } => DocAction::Continuous {
                            step: step.clone(),
                            var: var.clone(),
                            cond: cond_to_doc(condition),
                        },
                        Action::Stored {
                            step,
                            var,
                            value,
                            trigger,
                            condition,
                        } => DocAction::Stored {
                            step: step.clone(),
                            var: var.clone(),
                            value: value.to_string(),
                            trigger: *trigger,
                            cond: cond_to_doc(condition),
                        },
                        Action::Forcing {
                            step,
                            target,
                            situation,
                        } => DocAction::Forcing {
                            step: step.clone(),
                            target: target.clone(),
                            situation: match situation {
                                ForcedSituation::Steps(s) => DocSituation::Steps(s.clone()),
                                ForcedSituation::Current => DocSituation::Keyword("*".into()),
                                ForcedSituation::Init => DocSituation::Keyword("init".into()),
                            },
                        },
                    })
                    .collect(),
            })
            .collect(),
        queries: spec.queries.iter().map(|q| query_to_doc(q, spec)).collect(),
    }
}

/// Parses a document into a model without running [`validate`].
pub fn parse_spec_unchecked(text: &str) -> Result<GrafcetSpec, IngestError> {
    let doc: DocSpec = serde_json::from_str(text)?;
    spec_from_doc(doc)
}

/// Parses and validates a `.grafcet.json` document.
pub fn parse_spec(text: &str) -> Result<GrafcetSpec, IngestError> {
    let spec = parse_spec_unchecked(text)?;
    let errors: Vec<Finding> = validate(&spec)
        .into_iter()
        .filter(|f| f.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(IngestError::Semantic(errors))
    }
}

/// Parses a sidecar `.queries.json` file.
pub fn parse_queries(text: &str) -> Result<Vec<SafetyQuery>, IngestError> {
    let doc: DocQueryFile = serde_json::from_str(text)?;
    doc.queries.into_iter().map(query_from_doc).collect()
}

pub fn to_json(spec: &GrafcetSpec) -> String {
    serde_json::to_string_pretty(&spec_to_doc(spec)).expect("document serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"{
      "name": "fig1",
      "variables": [
        {"name": "a", "kind": "input", "type": "bool"},
        {"name": "b", "kind": "input", "type": "bool"},
        {"name": "H1", "kind": "output", "type": "bool"},
        {"name": "H2", "kind": "output", "type": "bool"}
      ],
      "partials": [
        {"id": "G0", "steps": [{"id": "1", "initial": true}],
         "enclosings": [{"step": "1", "target": "G1"}]},
        {"id": "G1", "steps": [{"id": "2", "marked": true}, {"id": "3"}],
         "transitions": [
           {"id": "t1", "from": ["2"], "to": ["3"], "cond": "a"},
           {"id": "t2", "from": ["3"], "to": ["2"], "cond": "b"}],
         "actions": [
           {"kind": "continuous", "step": "2", "var": "H1"},
           {"kind": "continuous", "step": "3", "var": "H2"}]}
      ]
    }"#;

    #[test]
    fn parses_two_partial_document() {
        let spec = parse_spec(FIG1).unwrap();
        assert_eq!(spec.partials.len(), 2);
        let g1 = spec.partial("G1").unwrap();
        assert!(g1.is_enclosed());
        assert_eq!(g1.transitions.len(), 2);
        assert_eq!(g1.actions.len(), 2);
    }

    #[test]
    fn round_trips() {
        let spec = parse_spec(FIG1).unwrap();
        let again = parse_spec(&to_json(&spec)).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn empty_partials_is_a_schema_error() {
        let err = parse_spec(r#"{"name": "x", "variables": [], "partials": []}"#).unwrap_err();
        assert!(matches!(err, IngestError::Schema(_)), "{err}");
    }

    #[test]
    fn unknown_field_is_a_schema_error() {
        let err = parse_spec(
            r#"{"name": "x", "variables": [], "partials": [{"id": "G", "steps": [], "colour": 1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::Schema(_)), "{err}");
    }

    #[test]
    fn syntax_errors_report_line_and_column() {
        let err = parse_spec("{\n  \"name\": \"x\",\n  oops\n}").unwrap_err();
        match err {
            IngestError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 3);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn condition_in_document() {
        let text = r#"{"name": "x",
          "variables": [{"name": "x", "kind": "input", "type": "bool"},
                        {"name": "k", "kind": "internal", "type": "int", "init": 0}],
          "partials": [{"id": "G", "steps": [{"id": "1", "initial": true}, {"id": "2"}],
            "transitions": [{"id": "t", "from": ["1"], "to": ["2"], "cond": "re(x) & k >= 3"}]}]}"#;
        let spec = parse_spec(text).unwrap();
        assert_eq!(
            spec.partials[0].transitions[0].condition.to_sexpr(),
            "(and (rising x) (>= k 3))"
        );
    }

    #[test]
    fn semantic_errors_are_reported() {
        let text = r#"{"name": "x", "variables": [],
          "partials": [{"id": "G", "steps": [{"id": "1"}],
            "transitions": [{"id": "t", "from": [], "to": []}]}]}"#;
        match parse_spec(text).unwrap_err() {
            IngestError::Semantic(f) => assert_eq!(f.len(), 1),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_forcing_keyword() {
        let text = r#"{"name": "x", "variables": [],
          "partials": [{"id": "A", "steps": [{"id": "1", "initial": true}],
             "actions": [{"kind": "forcing", "step": "1", "target": "B", "situation": "all"}]},
           {"id": "B", "steps": [{"id": "1"}]}]}"#;
        assert!(matches!(parse_spec(text), Err(IngestError::Schema(_))));
    }
}
