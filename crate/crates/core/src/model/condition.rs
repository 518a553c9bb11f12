//! Condition and value expressions.
//!
//! `Display` renders the concrete syntax accepted by
//! [`crate::ingest::parse_condition`], so printing and re-parsing yields the
//! same tree.

use std::collections::BTreeSet;
use std::fmt;

/// Reference to a step variable `X<partial>.<step>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepRef {
    pub partial: String,
    pub step: String,
}

impl StepRef {
    pub fn new(partial: impl Into<String>, step: impl Into<String>) -> Self {
        Self {
            partial: partial.into(),
            step: step.into(),
        }
    }

    /// Parses the `partial.step` form used in queries and reports.
    pub fn parse_dotted(text: &str) -> Option<Self> {
        let (p, s) = text.rsplit_once('.')?;
        (!p.is_empty() && !s.is_empty()).then(|| Self::new(p, s))
    }
}

impl fmt::Display for StepRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{}.{}", self.partial, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolRef {
    Var(String),
    Step(StepRef),
}

impl fmt::Display for BoolRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolRef::Var(v) => f.write_str(v),
            BoolRef::Step(s) => s.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(i64),
    Var(String),
    /// `k * v`
    Scaled(i64, String),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Const(_) => None,
            Term::Var(v) | Term::Scaled(_, v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SumTerm {
    pub negated: bool,
    pub term: Term,
}

/// Linear integer expression `[-] term (("+"|"-") term)*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sum(pub Vec<SumTerm>);

impl Sum {
    pub fn constant(k: i64) -> Self {
        if k < 0 {
            Sum(vec![SumTerm {
                negated: true,
                term: Term::Const(-k),
            }])
        } else {
            Sum(vec![SumTerm {
                negated: false,
                term: Term::Const(k),
            }])
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Sum(vec![SumTerm {
            negated: false,
            term: Term::Var(name.into()),
        }])
    }

    pub fn plus(mut self, negated: bool, term: Term) -> Self {
        self.0.push(SumTerm { negated, term });
        self
    }

    /// Collapses to `constant + Σ coeff·var`, merging repeated variables.
    pub fn linear_form(&self) -> (i64, Vec<(String, i64)>) {
        let mut constant = 0i64;
        let mut coeffs: Vec<(String, i64)> = Vec::new();
        for st in &self.0 {
            let sign = if st.negated { -1 } else { 1 };
            let (name, c) = match &st.term {
                Term::Const(k) => {
                    constant = constant.saturating_add(sign * k);
                    continue;
                }
                Term::Var(v) => (v, 1),
                Term::Scaled(k, v) => (v, *k),
            };
            match coeffs.iter_mut().find(|(n, _)| n == name) {
                Some((_, acc)) => *acc = acc.saturating_add(sign * c),
                None => coeffs.push((name.clone(), sign * c)),
            }
        }
        coeffs.retain(|(_, c)| *c != 0);
        (constant, coeffs)
    }

    pub fn eval(&self, lookup: &dyn Fn(&str) -> i64) -> i64 {
        let (k, coeffs) = self.linear_form();
        coeffs
            .iter()
            .fold(k, |acc, (v, c)| acc.saturating_add(c.saturating_mul(lookup(v))))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.0.iter().filter_map(|t| t.term.var())
    }
}

impl fmt::Display for Sum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, st) in self.0.iter().enumerate() {
            match (i, st.negated) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match &st.term {
                Term::Const(k) => write!(f, "{k}")?,
                Term::Var(v) => f.write_str(v)?,
                Term::Scaled(k, v) => write!(f, "{k} * {v}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Const(bool),
    Ref(BoolRef),
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Rising(BoolRef),
    Falling(BoolRef),
    Compare(CmpOp, Sum, Sum),
}

impl Default for Condition {
    fn default() -> Self {
        Condition::Const(true)
    }
}

impl Condition {
    pub fn var(name: impl Into<String>) -> Self {
        Condition::Ref(BoolRef::Var(name.into()))
    }

    pub fn step(partial: impl Into<String>, step: impl Into<String>) -> Self {
        Condition::Ref(BoolRef::Step(StepRef::new(partial, step)))
    }

    pub fn and(self, other: Condition) -> Self {
        Condition::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Condition) -> Self {
        Condition::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Self {
        Condition::Not(Box::new(self))
    }

    pub fn is_trivially_true(&self) -> bool {
        matches!(self, Condition::Const(true))
    }

    /// Every Boolean reference appearing in the condition, including edge operands.
    pub fn bool_refs(&self) -> BTreeSet<BoolRef> {
        let mut out = BTreeSet::new();
        self.visit_refs(&mut |r| {
            out.insert(r.clone());
        });
        out
    }

    /// Names of all (non-step) variables read, Boolean or integer.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |c| match c {
            Condition::Ref(BoolRef::Var(v))
            | Condition::Rising(BoolRef::Var(v))
            | Condition::Falling(BoolRef::Var(v)) => {
                out.insert(v.clone());
            }
            Condition::Compare(_, a, b) => {
                out.extend(a.vars().chain(b.vars()).map(str::to_owned));
            }
            _ => {}
        });
        out
    }

    /// True when the condition mentions no variable or step at all.
    pub fn is_closed(&self) -> bool {
        self.variables().is_empty() && self.bool_refs().is_empty()
    }

    fn visit_refs(&self, f: &mut dyn FnMut(&BoolRef)) {
        self.walk(&mut |c| match c {
            Condition::Ref(r) | Condition::Rising(r) | Condition::Falling(r) => f(r),
            _ => {}
        });
    }

    pub fn walk(&self, f: &mut dyn FnMut(&Condition)) {
        f(self);
        match self {
            Condition::Not(c) => c.walk(f),
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    /// Prefix rendering, e.g. `(and (rising x) (>= k 3))`.
    pub fn to_sexpr(&self) -> String {
        match self {
            Condition::Const(b) => b.to_string(),
            Condition::Ref(r) => r.to_string(),
            Condition::Not(c) => format!("(not {})", c.to_sexpr()),
            Condition::And(a, b) => format!("(and {} {})", a.to_sexpr(), b.to_sexpr()),
            Condition::Or(a, b) => format!("(or {} {})", a.to_sexpr(), b.to_sexpr()),
            Condition::Rising(r) => format!("(rising {r})"),
            Condition::Falling(r) => format!("(falling {r})"),
            Condition::Compare(op, a, b) => format!("({} {a} {b})", op.symbol()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or(..) => 0,
            Condition::And(..) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Left operands may share the operator's level (left-associative
        // parse); right operands and negated operands need a strictly
        // tighter binding.
        fn operand(
            f: &mut fmt::Formatter<'_>,
            c: &Condition,
            min_prec: u8,
        ) -> fmt::Result {
            if c.precedence() < min_prec {
                write!(f, "({c})")
            } else {
                write!(f, "{c}")
            }
        }
        match self {
            Condition::Const(b) => write!(f, "{b}"),
            Condition::Ref(r) => write!(f, "{r}"),
            Condition::Not(c) => {
                f.write_str("!")?;
                operand(f, c, 2)
            }
            Condition::And(a, b) => {
                operand(f, a, 1)?;
                f.write_str(" & ")?;
                operand(f, b, 2)
            }
            Condition::Or(a, b) => {
                operand(f, a, 0)?;
                f.write_str(" | ")?;
                operand(f, b, 1)
            }
            Condition::Rising(r) => write!(f, "re({r})"),
            Condition::Falling(r) => write!(f, "fe({r})"),
            Condition::Compare(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        }
    }
}

/// Right-hand side of a stored action.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueExpr {
    Int(Sum),
    Bool(Condition),
}

impl ValueExpr {
    pub fn variables(&self) -> BTreeSet<String> {
        match self {
            ValueExpr::Int(s) => s.vars().map(str::to_owned).collect(),
            ValueExpr::Bool(c) => c.variables(),
        }
    }
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Int(s) => s.fmt(f),
            ValueExpr::Bool(c) => c.fmt(f),
        }
    }
}

/// Name resolution used when type checking expressions.
pub trait TypeEnv {
    fn var_type(&self, name: &str) -> Option<super::VarType>;
    fn has_step(&self, step: &StepRef) -> bool;
}

impl TypeEnv for super::GrafcetSpec {
    fn var_type(&self, name: &str) -> Option<super::VarType> {
        self.variable(name).map(|v| v.ty)
    }

    fn has_step(&self, step: &StepRef) -> bool {
        self.resolve_step(step).is_some()
    }
}

/// Variable types only; every step reference is accepted.
impl TypeEnv for std::collections::BTreeMap<String, super::VarType> {
    fn var_type(&self, name: &str) -> Option<super::VarType> {
        self.get(name).copied()
    }

    fn has_step(&self, _step: &StepRef) -> bool {
        true
    }
}

fn check_bool_ref(r: &BoolRef, env: &dyn TypeEnv, errors: &mut Vec<String>) {
    use super::VarType;
    match r {
        BoolRef::Var(v) => match env.var_type(v) {
            None => errors.push(format!("unknown variable `{v}`")),
            Some(VarType::Int) => {
                errors.push(format!("integer variable `{v}` used as a Boolean"))
            }
            Some(VarType::Bool) => {}
        },
        BoolRef::Step(s) => {
            if !env.has_step(s) {
                errors.push(format!("unknown step variable `{s}`"));
            }
        }
    }
}

fn check_sum(sum: &Sum, env: &dyn TypeEnv, errors: &mut Vec<String>) {
    use super::VarType;
    for v in sum.vars() {
        match env.var_type(v) {
            None => errors.push(format!("unknown variable `{v}`")),
            Some(VarType::Bool) => {
                errors.push(format!("Boolean variable `{v}` used in arithmetic"))
            }
            Some(VarType::Int) => {}
        }
    }
}

impl Condition {
    /// Resolves every reference and checks operand types.
    pub fn type_errors(&self, env: &dyn TypeEnv) -> Vec<String> {
        let mut errors = Vec::new();
        self.walk(&mut |c| match c {
            Condition::Ref(r) => check_bool_ref(r, env, &mut errors),
            Condition::Rising(r) | Condition::Falling(r) => {
                if let BoolRef::Var(v) = r {
                    if env.var_type(v) == Some(super::VarType::Int) {
                        errors.push(format!("edge of integer variable `{v}`"));
                        return;
                    }
                }
                check_bool_ref(r, env, &mut errors);
            }
            Condition::Compare(_, a, b) => {
                check_sum(a, env, &mut errors);
                check_sum(b, env, &mut errors);
            }
            _ => {}
        });
        errors
    }
}

impl ValueExpr {
    pub fn type_errors(&self, target: super::VarType, env: &dyn TypeEnv) -> Vec<String> {
        use super::VarType;
        match (self, target) {
            (ValueExpr::Int(s), VarType::Int) => {
                let mut errors = Vec::new();
                check_sum(s, env, &mut errors);
                errors
            }
            (ValueExpr::Bool(c), VarType::Bool) => c.type_errors(env),
            (_, t) => vec![format!("value `{self}` does not have type {t}")],
        }
    }
}
