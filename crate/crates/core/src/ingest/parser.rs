//! Recursive-descent parser for condition and value expressions.
//!
//! ```text
//! expr       := or
//! or         := and ("|" and)*
//! and        := unary ("&" unary)*
//! unary      := "!" unary | atom
//! atom       := comparison | boolref | "true" | "false" | "(" expr ")"
//!             | "re(" boolref ")" | "fe(" boolref ")"
//! comparison := sum ("=" | "<>" | "<" | "<=" | ">" | ">=") sum
//! sum        := ["-"] term (("+" | "-") term)*
//! term       := INT | INT "*" var | var
//! ```
//!
//! Step variables are written `X<partial>.<step>`.

use thiserror::Error;

use crate::model::{
    BoolRef, CmpOp, Condition, StepRef, Sum, SumTerm, Term, TypeEnv, ValueExpr, VarType,
};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("{message} at offset {offset}")]
    Syntax { offset: usize, message: String },
    #[error("type error: {0}")]
    Type(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    Plus,
    Minus,
    Star,
    Cmp(CmpOp),
}

fn describe(t: Option<&Tok>) -> String {
    match t {
        None => "end of input".into(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::Int(i)) => format!("`{i}`"),
        Some(Tok::Cmp(op)) => format!("`{}`", op.symbol()),
        Some(other) => format!("{other:?}"),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'=' => Some(Tok::Cmp(CmpOp::Eq)),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((start, tok));
            i += 1;
            continue;
        }
        match c {
            b'<' => {
                let (tok, len) = match bytes.get(i + 1) {
                    Some(b'=') => (CmpOp::Le, 2),
                    Some(b'>') => (CmpOp::Ne, 2),
                    _ => (CmpOp::Lt, 1),
                };
                out.push((start, Tok::Cmp(tok)));
                i += len;
            }
            b'>' => {
                let (tok, len) = match bytes.get(i + 1) {
                    Some(b'=') => (CmpOp::Ge, 2),
                    _ => (CmpOp::Gt, 1),
                };
                out.push((start, Tok::Cmp(tok)));
                i += len;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let value = text[start..i].parse::<i64>().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: "integer literal out of range".into(),
                })?;
                out.push((start, Tok::Int(value)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_owned())));
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    depth: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ExprError> {
        Ok(Self {
            toks: lex(text)?,
            pos: 0,
            end: text.len(),
            depth: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            let found = describe(self.peek());
            self.fail(format!("expected {what}, found {found}"))
        }
    }

    fn finish(&self) -> Result<(), ExprError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.fail(format!("unexpected {}", describe(Some(t)))),
        }
    }

    fn or(&mut self) -> Result<Condition, ExprError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = lhs.or(rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Condition, ExprError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = lhs.and(rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Condition, ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.fail("expression nested too deeply");
        }
        let result = if self.peek() == Some(&Tok::Bang) {
            self.pos += 1;
            self.unary().map(Condition::negate)
        } else {
            self.atom()
        };
        self.depth -= 1;
        result
    }

    fn atom(&mut self) -> Result<Condition, ExprError> {
        match (self.peek(), self.peek2()) {
            (Some(Tok::LParen), _) => {
                self.pos += 1;
                let inner = self.or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            (Some(Tok::Ident(name)), Some(Tok::LParen)) if name == "re" || name == "fe" => {
                let rising = name == "re";
                self.pos += 2;
                let r = self.bool_ref()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if rising {
                    Condition::Rising(r)
                } else {
                    Condition::Falling(r)
                })
            }
            (Some(Tok::Ident(name)), _) if name == "true" || name == "false" => {
                let value = name == "true";
                self.pos += 1;
                Ok(Condition::Const(value))
            }
            (Some(Tok::Ident(name)), next)
                if name.contains('.') && !matches!(next, Some(Tok::Cmp(_))) =>
            {
                let r = self.bool_ref()?;
                Ok(Condition::Ref(r))
            }
            (None, _) => self.fail("unexpected end of input"),
            _ => {
                let start = self.offset();
                let lhs = self.sum()?;
                if let Some(Tok::Cmp(op)) = self.peek() {
                    let op = *op;
                    self.pos += 1;
                    let rhs = self.sum()?;
                    return Ok(Condition::Compare(op, lhs, rhs));
                }
                match lhs.0.as_slice() {
                    [SumTerm {
                        negated: false,
                        term: Term::Var(v),
                    }] => Ok(Condition::Ref(BoolRef::Var(v.clone()))),
                    _ => Err(ExprError::Syntax {
                        offset: start,
                        message: "integer expression used as a condition; expected a comparison"
                            .into(),
                    }),
                }
            }
        }
    }

    fn bool_ref(&mut self) -> Result<BoolRef, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Ident(name)) => ident_to_ref(&name).ok_or(ExprError::Syntax {
                offset,
                message: format!("malformed step variable `{name}`, expected X<partial>.<step>"),
            }),
            other => Err(ExprError::Syntax {
                offset,
                message: format!("expected a variable, found {}", describe(other.as_ref())),
            }),
        }
    }

    fn sum(&mut self) -> Result<Sum, ExprError> {
        let mut terms = Vec::new();
        let mut negated = false;
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            negated = true;
        }
        loop {
            let term = self.term()?;
            terms.push(SumTerm { negated, term });
            match self.peek() {
                Some(Tok::Plus) => negated = false,
                Some(Tok::Minus) => negated = true,
                _ => break,
            }
            self.pos += 1;
        }
        Ok(Sum(terms))
    }

    fn term(&mut self) -> Result<Term, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Int(k)) => {
                if self.peek() == Some(&Tok::Star) {
                    self.pos += 1;
                    let v = self.int_var()?;
                    Ok(Term::Scaled(k, v))
                } else {
                    Ok(Term::Const(k))
                }
            }
            Some(Tok::Ident(name)) if is_plain_name(&name) => Ok(Term::Var(name)),
            other => Err(ExprError::Syntax {
                offset,
                message: format!("expected an integer term, found {}", describe(other.as_ref())),
            }),
        }
    }

    fn int_var(&mut self) -> Result<String, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Ident(name)) if is_plain_name(&name) => Ok(name),
            other => Err(ExprError::Syntax {
                offset,
                message: format!("expected a variable, found {}", describe(other.as_ref())),
            }),
        }
    }
}

fn is_plain_name(name: &str) -> bool {
    !name.contains('.') && !matches!(name, "true" | "false")
}

fn ident_to_ref(name: &str) -> Option<BoolRef> {
    if !name.contains('.') {
        return is_plain_name(name).then(|| BoolRef::Var(name.to_owned()));
    }
    let body = name.strip_prefix('X')?;
    let (partial, step) = body.split_once('.')?;
    if partial.is_empty() || step.is_empty() || step.contains('.') {
        return None;
    }
    Some(BoolRef::Step(StepRef::new(partial, step)))
}

/// Parses a condition without resolving names.
pub fn parse_condition(text: &str) -> Result<Condition, ExprError> {
    let mut p = Parser::new(text)?;
    let c = p.or()?;
    p.finish()?;
    Ok(c)
}

/// Parses a condition and checks it against the declarations in `env`.
pub fn parse_condition_typed(text: &str, env: &dyn TypeEnv) -> Result<Condition, ExprError> {
    let c = parse_condition(text)?;
    match c.type_errors(env).into_iter().next() {
        Some(e) => Err(ExprError::Type(e)),
        None => Ok(c),
    }
}

pub fn parse_sum(text: &str) -> Result<Sum, ExprError> {
    let mut p = Parser::new(text)?;
    if p.peek().is_none() {
        return p.fail("empty expression");
    }
    let s = p.sum()?;
    p.finish()?;
    Ok(s)
}

/// Parses the right-hand side of a stored action for a target of type `ty`.
///
/// Boolean targets also accept the integer literals `0` and `1`.
pub fn parse_value(text: &str, ty: Option<VarType>) -> Result<ValueExpr, ExprError> {
    match ty {
        Some(VarType::Int) => parse_sum(text).map(ValueExpr::Int),
        Some(VarType::Bool) => match text.trim() {
            "0" => Ok(ValueExpr::Bool(Condition::Const(false))),
            "1" => Ok(ValueExpr::Bool(Condition::Const(true))),
            _ => parse_condition(text).map(ValueExpr::Bool),
        },
        None => parse_sum(text)
            .map(ValueExpr::Int)
            .or_else(|_| parse_condition(text).map(ValueExpr::Bool)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn env() -> BTreeMap<String, VarType> {
        [
            ("x", VarType::Bool),
            ("b", VarType::Bool),
            ("s", VarType::Bool),
            ("X2", VarType::Bool),
            ("k", VarType::Int),
        ]
        .into_iter()
        .map(|(n, t)| (n.to_owned(), t))
        .collect()
    }

    #[test]
    fn edge_and_comparison() {
        let c = parse_condition("re(x) & k >= 3").unwrap();
        assert_eq!(c.to_sexpr(), "(and (rising x) (>= k 3))");
    }

    #[test]
    fn negated_falling_edge() {
        let c = parse_condition("X2 & !fe(b)").unwrap();
        assert_eq!(c.to_sexpr(), "(and X2 (not (falling b)))");
    }

    #[test]
    fn comparison_binds_tighter_than_or() {
        let c = parse_condition_typed("k = 4 | s", &env()).unwrap();
        assert_eq!(c.to_sexpr(), "(or (= k 4) s)");
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let c = parse_condition("x | b & s").unwrap();
        assert_eq!(c.to_sexpr(), "(or x (and b s))");
        let c = parse_condition("(x | b) & s").unwrap();
        assert_eq!(c.to_sexpr(), "(and (or x b) s)");
    }

    #[test]
    fn edge_of_integer_is_a_type_error() {
        let err = parse_condition_typed("re(k)", &env()).unwrap_err();
        assert!(matches!(err, ExprError::Type(_)), "{err:?}");
    }

    #[test]
    fn step_variables() {
        let c = parse_condition("XG1.2 | !XG_RIT.10").unwrap();
        assert_eq!(c.to_sexpr(), "(or XG1.2 (not XG_RIT.10))");
        assert!(parse_condition("G1.2").is_err());
    }

    #[test]
    fn linear_sums() {
        let c = parse_condition("2 * k - 1 <> -k + 3").unwrap();
        assert_eq!(c.to_string(), "2 * k - 1 <> -k + 3");
        let s = parse_sum("k + 1").unwrap();
        assert_eq!(s.linear_form(), (1, vec![("k".to_owned(), 1)]));
    }

    #[test]
    fn errors_carry_offsets() {
        match parse_condition("x & (b | ").unwrap_err() {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 9),
            e => panic!("{e:?}"),
        }
        match parse_condition("x # b").unwrap_err() {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 2),
            e => panic!("{e:?}"),
        }
        assert!(parse_condition("k + 1").is_err());
        assert!(parse_condition("").is_err());
        assert!(parse_condition("re k").is_err());
    }

    #[test]
    fn values() {
        assert_eq!(
            parse_value("k + 1", Some(VarType::Int)).unwrap(),
            ValueExpr::Int(Sum::var("k").plus(false, Term::Const(1)))
        );
        assert_eq!(
            parse_value("1", Some(VarType::Bool)).unwrap(),
            ValueExpr::Bool(Condition::Const(true))
        );
        assert_eq!(
            parse_value("!b", Some(VarType::Bool)).unwrap(),
            ValueExpr::Bool(Condition::var("b").negate())
        );
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let text = "(".repeat(10_000) + "x" + &")".repeat(10_000);
        assert!(parse_condition(&text).is_err());
        let text = "!".repeat(10_000) + "x";
        assert!(parse_condition(&text).is_err());
    }
}
