//! First-order constraint expressions used for rules, pre/postconditions,
//! legal issues, guards, and price amounts.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::types::{DataType, Value};
use super::ContextInfo;
use crate::syntax::{Cursor, ParseError, Pos, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    And,
    Or,
    Implies,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Max,
    Min,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "=>",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Max => "max",
            BinOp::Min => "min",
        }
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Max | BinOp::Min
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Lit(Value),
    /// Parameter (or free condition variable) reference.
    Var(String),
    /// Requester-context dimension reference, written `ctx.<dimension>`.
    Ctx(String),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

pub type ConstraintExpr = Expr;

impl Expr {
    pub fn tt() -> Expr {
        Expr::Lit(Value::Bool(true))
    }

    pub fn int(v: i64) -> Expr {
        Expr::Lit(Value::Int(v))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(true)))
    }

    /// Parameter names referenced (not context dimensions).
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn ctx_dims(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Ctx(d) = e {
                out.insert(d.clone());
            }
        });
        out
    }

    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Not(e) => e.walk(f),
            Expr::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            _ => {}
        }
    }

    /// `name == true` or bare `name`: the shape of a boolean flag condition.
    pub fn as_flag(&self) -> Option<&str> {
        match self {
            Expr::Var(v) => Some(v),
            Expr::Binary(BinOp::Eq, l, r) => match (&**l, &**r) {
                (Expr::Var(v), Expr::Lit(Value::Bool(true)))
                | (Expr::Lit(Value::Bool(true)), Expr::Var(v)) => Some(v),
                _ => None,
            },
            _ => None,
        }
    }

    /// `name == <literal>` (either orientation).
    pub fn as_var_eq_literal(&self) -> Option<(&str, &Value)> {
        match self {
            Expr::Binary(BinOp::Eq, l, r) => match (&**l, &**r) {
                (Expr::Var(v), Expr::Lit(c)) | (Expr::Lit(c), Expr::Var(v)) => Some((v, c)),
                _ => None,
            },
            _ => None,
        }
    }

    /// Folds arithmetic on constant operands; leaves everything else intact.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.simplify(), r.simplify());
                if op.is_arithmetic() {
                    if let (Expr::Lit(a), Expr::Lit(b)) = (&l, &r) {
                        if let Ok(v) = arith(*op, a, b) {
                            return Expr::Lit(v);
                        }
                    }
                }
                Expr::bin(*op, l, r)
            }
            Expr::Not(e) => Expr::not(e.simplify()),
            other => other.clone(),
        }
    }

    /// Structural negation used for else-branches and loop exits.
    pub fn negate(&self) -> Expr {
        match self {
            Expr::Not(e) => (**e).clone(),
            Expr::Lit(Value::Bool(b)) => Expr::Lit(Value::Bool(!b)),
            other => Expr::not(other.clone()),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Binary(op, _, _) if !matches!(op, BinOp::Max | BinOp::Min) => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Ctx(d) => write!(f, "ctx.{d}"),
            Expr::Not(e) => {
                f.write_str("!")?;
                write_operand(f, e)
            }
            Expr::Binary(op @ (BinOp::Max | BinOp::Min), l, r) => {
                write!(f, "{}({l}, {r})", op.symbol())
            }
            Expr::Binary(op, l, r) => {
                write_operand(f, l)?;
                f.write_str(op.symbol())?;
                write_operand(f, r)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// How a bare identifier resolves inside a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ident {
    Var,
    Symbol,
}

/// Name resolution used while parsing constraints.
pub trait Scope {
    fn ident(&self, name: &str) -> Option<Ident>;
    fn dimension(&self, name: &str) -> bool;
}

/// Accepts every identifier as a variable and every dimension.
pub struct FreeScope;

impl Scope for FreeScope {
    fn ident(&self, _: &str) -> Option<Ident> {
        Some(Ident::Var)
    }
    fn dimension(&self, _: &str) -> bool {
        true
    }
}

/// Parses a standalone constraint, resolving every identifier as a variable.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    parse_expr_in(src, &FreeScope)
}

pub fn parse_expr_in(src: &str, scope: &dyn Scope) -> Result<Expr, ParseError> {
    let mut cur = Cursor::new(src)?;
    let e = ExprParser { cur: &mut cur, scope }.expr()?;
    cur.expect_eof()?;
    Ok(e)
}

pub struct ExprParser<'a> {
    pub cur: &'a mut Cursor,
    pub scope: &'a dyn Scope,
}

impl ExprParser<'_> {
    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.or()?;
        if self.cur.eat(&Tok::Implies) {
            let rhs = self.expr()?;
            return Ok(Expr::bin(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.cur.eat(&Tok::OrOr) {
            lhs = Expr::bin(BinOp::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.equality()?;
        while self.cur.eat(&Tok::AndAnd) {
            lhs = Expr::bin(BinOp::And, lhs, self.equality()?);
        }
        Ok(lhs)
    }

    fn equality(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.relation()?;
        loop {
            let op = match self.cur.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                _ => return Ok(lhs),
            };
            self.cur.next();
            lhs = Expr::bin(op, lhs, self.relation()?);
        }
    }

    fn relation(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => return Ok(lhs),
            };
            self.cur.next();
            lhs = Expr::bin(op, lhs, self.additive()?);
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.next();
            lhs = Expr::bin(op, lhs, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.cur.eat(&Tok::Star) {
            lhs = Expr::bin(BinOp::Mul, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.cur.eat(&Tok::Bang) {
            return Ok(Expr::not(self.unary()?));
        }
        if self.cur.eat(&Tok::Minus) {
            return Ok(match self.cur.peek().clone() {
                Tok::Int(v) => {
                    self.cur.next();
                    Expr::Lit(Value::Int(-v))
                }
                Tok::Real(v) => {
                    self.cur.next();
                    Expr::Lit(Value::real(-v))
                }
                _ => Expr::bin(BinOp::Sub, Expr::int(0), self.unary()?),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.cur.pos();
        match self.cur.peek().clone() {
            Tok::Int(v) => {
                self.cur.next();
                Ok(Expr::Lit(Value::Int(v)))
            }
            Tok::Real(v) => {
                self.cur.next();
                Ok(Expr::Lit(Value::real(v)))
            }
            Tok::Str(s) => {
                self.cur.next();
                Ok(Expr::Lit(Value::Str(s)))
            }
            Tok::LParen => {
                self.cur.next();
                let e = self.expr()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.cur.next();
                match name.as_str() {
                    "true" => return Ok(Expr::Lit(Value::Bool(true))),
                    "false" => return Ok(Expr::Lit(Value::Bool(false))),
                    "ctx" if self.cur.at(&Tok::Dot) => {
                        self.cur.next();
                        let (dim, dpos) = self.cur.expect_ident()?;
                        if !self.scope.dimension(&dim) {
                            return Err(ParseError::UnknownName {
                                pos: dpos,
                                name: format!("ctx.{dim}"),
                            });
                        }
                        return Ok(Expr::Ctx(dim));
                    }
                    "max" | "min" if self.cur.at(&Tok::LParen) => {
                        let op = if name == "max" { BinOp::Max } else { BinOp::Min };
                        self.cur.next();
                        let a = self.expr()?;
                        self.cur.expect(&Tok::Comma)?;
                        let b = self.expr()?;
                        self.cur.expect(&Tok::RParen)?;
                        return Ok(Expr::bin(op, a, b));
                    }
                    _ => {}
                }
                self.resolve(name, pos)
            }
            _ => Err(self.cur.unexpected("expression")),
        }
    }

    fn resolve(&self, name: String, pos: Pos) -> Result<Expr, ParseError> {
        match self.scope.ident(&name) {
            Some(Ident::Var) => Ok(Expr::Var(name)),
            Some(Ident::Symbol) => Ok(Expr::Lit(Value::Sym(name))),
            None => Err(ParseError::UnknownName { pos, name }),
        }
    }
}

// ---------------------------------------------------------------------------
// Typing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("type error in `{expr}`: {msg}")]
pub struct TypeError {
    pub expr: String,
    pub msg: String,
}

/// Types of names visible to a constraint.
pub trait TypeEnv {
    fn var_type(&self, name: &str) -> Option<&DataType>;
    fn dim_type(&self, dim: &str) -> Option<&DataType>;
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Bool,
    Num,
    Str,
    /// Enum-typed name (carries the member list) or bare symbol literal.
    Enum(Option<Vec<String>>),
    Tag,
    Sym(String),
    Tuple(DataType),
}

impl Ty {
    fn of(dt: &DataType) -> Ty {
        match dt {
            DataType::Bool => Ty::Bool,
            DataType::Int | DataType::Double | DataType::Time => Ty::Num,
            DataType::String => Ty::Str,
            DataType::Enum { values, .. } => Ty::Enum(Some(values.clone())),
            DataType::Currency | DataType::PricingUnit => Ty::Tag,
            DataType::Tuple(_) => Ty::Tuple(dt.clone()),
        }
    }

    fn of_value(v: &Value) -> Ty {
        match v {
            Value::Bool(_) => Ty::Bool,
            Value::Int(_) | Value::Real(_) => Ty::Num,
            Value::Str(_) => Ty::Str,
            Value::Sym(s) => Ty::Sym(s.clone()),
            Value::Tuple(vs) => Ty::Tuple(DataType::Tuple(
                vs.iter()
                    .map(|v| match v {
                        Value::Bool(_) => DataType::Bool,
                        Value::Int(_) => DataType::Int,
                        Value::Real(_) => DataType::Double,
                        Value::Sym(s) => DataType::Enum {
                            name: String::new(),
                            values: vec![s.clone()],
                        },
                        _ => DataType::String,
                    })
                    .collect(),
            )),
        }
    }

    fn comparable(&self, other: &Ty) -> bool {
        match (self, other) {
            (Ty::Bool, Ty::Bool) | (Ty::Num, Ty::Num) | (Ty::Str, Ty::Str) => true,
            (Ty::Enum(Some(a)), Ty::Enum(Some(b))) => a == b,
            (Ty::Enum(Some(vals)), Ty::Sym(s)) | (Ty::Sym(s), Ty::Enum(Some(vals))) => {
                vals.contains(s)
            }
            (Ty::Sym(_), Ty::Sym(_)) => true,
            (Ty::Tag, Ty::Tag | Ty::Sym(_)) | (Ty::Sym(_), Ty::Tag) => true,
            (Ty::Tuple(a), Ty::Tuple(b)) => {
                matches!((a, b), (DataType::Tuple(x), DataType::Tuple(y)) if x.len() == y.len())
            }
            _ => false,
        }
    }
}

impl Expr {
    /// Checks that the expression is well typed and boolean-valued.
    pub fn check_bool(&self, env: &dyn TypeEnv) -> Result<(), TypeError> {
        match self.ty(env)? {
            Ty::Bool => Ok(()),
            _ => Err(self.type_error("expected a boolean constraint")),
        }
    }

    /// Checks that the expression is well typed and numeric.
    pub fn check_numeric(&self, env: &dyn TypeEnv) -> Result<(), TypeError> {
        match self.ty(env)? {
            Ty::Num => Ok(()),
            _ => Err(self.type_error("expected a numeric expression")),
        }
    }

    fn type_error(&self, msg: &str) -> TypeError {
        TypeError {
            expr: self.to_string(),
            msg: msg.to_string(),
        }
    }

    fn ty(&self, env: &dyn TypeEnv) -> Result<Ty, TypeError> {
        match self {
            Expr::Lit(v) => Ok(Ty::of_value(v)),
            Expr::Var(v) => env
                .var_type(v)
                .map(Ty::of)
                .ok_or_else(|| self.type_error(&format!("unknown name `{v}`"))),
            Expr::Ctx(d) => env
                .dim_type(d)
                .map(Ty::of)
                .ok_or_else(|| self.type_error(&format!("unknown dimension `{d}`"))),
            Expr::Not(e) => match e.ty(env)? {
                Ty::Bool => Ok(Ty::Bool),
                _ => Err(self.type_error("`!` needs a boolean operand")),
            },
            Expr::Binary(op, l, r) => {
                let (lt, rt) = (l.ty(env)?, r.ty(env)?);
                if op.is_logical() {
                    if lt == Ty::Bool && rt == Ty::Bool {
                        return Ok(Ty::Bool);
                    }
                    return Err(self.type_error("logical operator needs boolean operands"));
                }
                if op.is_arithmetic() {
                    if lt == Ty::Num && rt == Ty::Num {
                        return Ok(Ty::Num);
                    }
                    return Err(self.type_error("arithmetic needs numeric operands"));
                }
                match op {
                    BinOp::Eq | BinOp::Ne if lt.comparable(&rt) => Ok(Ty::Bool),
                    BinOp::Eq | BinOp::Ne => Err(self.type_error("operands are not comparable")),
                    _ if lt == Ty::Num && rt == Ty::Num => Ok(Ty::Bool),
                    _ => Err(self.type_error("ordering needs numeric operands")),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("requester context has no dimension `{0}`")]
    UnboundDimension(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arithmetic overflow")]
    Overflow,
}

/// Evaluation context for constraints: parameter bindings plus the
/// requester's context.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    pub bindings: indexmap::IndexMap<String, Value>,
    pub requester: ContextInfo,
}

impl Environment {
    pub fn with_binding(mut self, name: impl Into<String>, v: Value) -> Self {
        self.bindings.insert(name.into(), v);
        self
    }
}

fn mismatch(op: BinOp, a: &Value, b: &Value) -> EvalError {
    EvalError::TypeMismatch(format!("{} {} {}", a.kind(), op.symbol(), b.kind()))
}

pub(crate) fn arith(op: BinOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let v = match op {
                BinOp::Add => x.checked_add(*y),
                BinOp::Sub => x.checked_sub(*y),
                BinOp::Mul => x.checked_mul(*y),
                BinOp::Max => Some(*x.max(y)),
                BinOp::Min => Some(*x.min(y)),
                _ => return Err(mismatch(op, a, b)),
            };
            v.map(Value::Int).ok_or(EvalError::Overflow)
        }
        _ => {
            let (x, y) = match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => (x, y),
                _ => return Err(mismatch(op, a, b)),
            };
            let v = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Max => x.max(y),
                BinOp::Min => x.min(y),
                _ => return Err(mismatch(op, a, b)),
            };
            Ok(Value::real(v))
        }
    }
}

fn values_equal(op: BinOp, a: &Value, b: &Value) -> Result<bool, EvalError> {
    if a.is_numeric() && b.is_numeric() {
        return Ok(a.as_f64() == b.as_f64());
    }
    match (a, b) {
        (Value::Bool(_), Value::Bool(_))
        | (Value::Str(_), Value::Str(_))
        | (Value::Sym(_), Value::Sym(_))
        | (Value::Tuple(_), Value::Tuple(_)) => Ok(a == b),
        _ => Err(mismatch(op, a, b)),
    }
}

/// Evaluates `e` under `env`. Both operands of every connective are
/// evaluated, so any unbound name is reported even when it would not
/// affect the result.
pub fn eval(e: &Expr, env: &Environment) -> Result<Value, EvalError> {
    match e {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(v) => env
            .bindings
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Expr::Ctx(d) => env
            .requester
            .entries
            .get(d)
            .cloned()
            .ok_or_else(|| EvalError::UnboundDimension(d.clone())),
        Expr::Not(inner) => match eval(inner, env)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(EvalError::TypeMismatch(format!("!{}", other.kind()))),
        },
        Expr::Binary(op, l, r) => {
            let (a, b) = (eval(l, env)?, eval(r, env)?);
            match op {
                BinOp::And | BinOp::Or | BinOp::Implies => match (&a, &b) {
                    (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(match op {
                        BinOp::And => *x && *y,
                        BinOp::Or => *x || *y,
                        _ => !*x || *y,
                    })),
                    _ => Err(mismatch(*op, &a, &b)),
                },
                BinOp::Eq => values_equal(*op, &a, &b).map(Value::Bool),
                BinOp::Ne => values_equal(*op, &a, &b).map(|x| Value::Bool(!x)),
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let (x, y) = match (a.as_f64(), b.as_f64()) {
                        (Some(x), Some(y)) => (x, y),
                        _ => return Err(mismatch(*op, &a, &b)),
                    };
                    Ok(Value::Bool(match op {
                        BinOp::Lt => x < y,
                        BinOp::Le => x <= y,
                        BinOp::Gt => x > y,
                        _ => x >= y,
                    }))
                }
                _ => arith(*op, &a, &b),
            }
        }
    }
}

/// Evaluates a constraint that must produce a boolean.
pub fn eval_bool(e: &Expr, env: &Environment) -> Result<bool, EvalError> {
    match eval(e, env)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch(format!(
            "expected bool, got {}",
            other.kind()
        ))),
    }
}
