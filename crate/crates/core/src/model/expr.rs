//! Arithmetic over measure names: `+ - * /`, parentheses, numeric literals and
//! references. Names that are not plain identifiers are written in brackets,
//! e.g. `[Profit Ratio] * 100`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Number(f64),
    Measure(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at offset {offset}")]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

/// Outcome of evaluating an expression against aggregated values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalOutcome {
    Value(f64),
    Null,
    DivisionByZero,
}

impl Expr {
    pub fn references(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Number(_) => {}
            Expr::Measure(m) => {
                out.insert(m.as_str());
            }
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Binary(_, l, r) => {
                l.collect_refs(out);
                r.collect_refs(out);
            }
        }
    }

    /// Evaluates with `lookup` supplying each referenced measure's value (`None` = null).
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> EvalOutcome {
        match self {
            Expr::Number(n) => EvalOutcome::Value(*n),
            Expr::Measure(m) => match lookup(m) {
                Some(v) => EvalOutcome::Value(v),
                None => EvalOutcome::Null,
            },
            Expr::Neg(e) => match e.eval(lookup) {
                EvalOutcome::Value(v) => EvalOutcome::Value(-v),
                other => other,
            },
            Expr::Binary(op, l, r) => {
                let (l, r) = match (l.eval(lookup), r.eval(lookup)) {
                    (EvalOutcome::DivisionByZero, _) | (_, EvalOutcome::DivisionByZero) => {
                        return EvalOutcome::DivisionByZero
                    }
                    (EvalOutcome::Value(l), EvalOutcome::Value(r)) => (l, r),
                    _ => return EvalOutcome::Null,
                };
                match op {
                    BinOp::Add => EvalOutcome::Value(l + r),
                    BinOp::Sub => EvalOutcome::Value(l - r),
                    BinOp::Mul => EvalOutcome::Value(l * r),
                    BinOp::Div if r == 0.0 => EvalOutcome::DivisionByZero,
                    BinOp::Div => EvalOutcome::Value(l / r),
                }
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right_side: bool) -> fmt::Result {
        match self {
            Expr::Number(n) => {
                if *n < 0.0 {
                    write!(f, "({n})")
                } else {
                    write!(f, "{n}")
                }
            }
            Expr::Measure(m) => {
                if is_identifier(m) {
                    f.write_str(m)
                } else {
                    write!(f, "[{m}]")
                }
            }
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_prec(f, 3, false)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let wrap = p < parent || (right_side && p == parent);
                if wrap {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p, false)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p, true)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = ExprParser { src: s, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < s.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct ExprParser<'a> {
    src: &'a str,
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        if self.peek() == Some('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some('[') => {
                self.pos += 1;
                let rest = &self.src[self.pos..];
                let Some(close) = rest.find(']') else {
                    return Err(self.error("unterminated '['"));
                };
                let name = rest[..close].trim();
                if name.is_empty() {
                    return Err(self.error("empty measure name"));
                }
                self.pos += close + 1;
                Ok(Expr::Measure(name.to_string()))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                if matches!(self.peek(), Some('e' | 'E')) {
                    let save = self.pos;
                    self.pos += 1;
                    if matches!(self.peek(), Some('+' | '-')) {
                        self.pos += 1;
                    }
                    if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        self.pos = save;
                    }
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                }
                let text = &self.src[start..self.pos];
                let n: f64 = text.parse().map_err(|_| ExprError {
                    offset: start,
                    message: format!("invalid number {text:?}"),
                })?;
                if !n.is_finite() {
                    return Err(ExprError {
                        offset: start,
                        message: "number out of range".into(),
                    });
                }
                Ok(Expr::Number(n))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                Ok(Expr::Measure(self.src[start..self.pos].to_string()))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}
