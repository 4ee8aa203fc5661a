use std::fmt;

use crate::model::BinOp;

use super::REQUESTER;

/// Integer-valued expression in the model language. Booleans are 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaExpr {
    Bool(bool),
    Int(i64),
    /// Global variable, clock, or declared constant.
    Var(String),
    /// Field of the requester-context record.
    Field(String),
    /// `process.location`, only meaningful in queries.
    Loc { process: String, location: String },
    Not(Box<TaExpr>),
    Bin(BinOp, Box<TaExpr>, Box<TaExpr>),
}

/// Lookup of names during evaluation.
pub trait Valuation {
    fn var(&self, name: &str) -> Option<i64>;
    fn field(&self, name: &str) -> Option<i64>;
    fn at(&self, process: &str, location: &str) -> Option<bool>;
}

impl TaExpr {
    pub fn var(name: impl Into<String>) -> Self {
        TaExpr::Var(name.into())
    }

    pub fn bin(op: BinOp, l: TaExpr, r: TaExpr) -> Self {
        TaExpr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: TaExpr) -> Self {
        TaExpr::Not(Box::new(e))
    }

    pub fn loc(process: impl Into<String>, location: impl Into<String>) -> Self {
        TaExpr::Loc {
            process: process.into(),
            location: location.into(),
        }
    }

    fn is_atomic(&self) -> bool {
        match self {
            TaExpr::Not(e) => e.is_atomic(),
            TaExpr::Bin(..) => false,
            TaExpr::Int(i) => *i >= 0,
            _ => true,
        }
    }

    pub fn walk(&self, f: &mut impl FnMut(&TaExpr)) {
        f(self);
        match self {
            TaExpr::Not(e) => e.walk(f),
            TaExpr::Bin(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            _ => {}
        }
    }

    /// Names read as variables.
    pub fn var_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let TaExpr::Var(v) = e {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    pub fn eval(&self, v: &dyn Valuation) -> Result<i64, String> {
        match self {
            TaExpr::Bool(b) => Ok(*b as i64),
            TaExpr::Int(i) => Ok(*i),
            TaExpr::Var(n) => v.var(n).ok_or_else(|| format!("unknown name `{n}`")),
            TaExpr::Field(n) => v
                .field(n)
                .ok_or_else(|| format!("unknown field `{REQUESTER}.{n}`")),
            TaExpr::Loc { process, location } => v
                .at(process, location)
                .map(|b| b as i64)
                .ok_or_else(|| format!("unknown location `{process}.{location}`")),
            TaExpr::Not(e) => Ok((e.eval(v)? == 0) as i64),
            TaExpr::Bin(op, l, r) => {
                let a = l.eval(v)?;
                match op {
                    BinOp::And if a == 0 => return Ok(0),
                    BinOp::Or if a != 0 => return Ok(1),
                    BinOp::Implies if a == 0 => return Ok(1),
                    _ => {}
                }
                apply(*op, a, r.eval(v)?)
            }
        }
    }
}

/// Applies a binary operator to already evaluated operands.
pub fn apply(op: BinOp, a: i64, b: i64) -> Result<i64, String> {
    let overflow = || "arithmetic overflow".to_string();
    Ok(match op {
        BinOp::And => (a != 0 && b != 0) as i64,
        BinOp::Or => (a != 0 || b != 0) as i64,
        BinOp::Implies => (a == 0 || b != 0) as i64,
        BinOp::Eq => (a == b) as i64,
        BinOp::Ne => (a != b) as i64,
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
        BinOp::Gt => (a > b) as i64,
        BinOp::Ge => (a >= b) as i64,
        BinOp::Add => a.checked_add(b).ok_or_else(overflow)?,
        BinOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
        BinOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
        BinOp::Max => a.max(b),
        BinOp::Min => a.min(b),
    })
}

struct Operand<'a>(&'a TaExpr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            TaExpr::Bin(BinOp::Max | BinOp::Min, ..) => write!(f, "{}", self.0),
            e if !e.is_atomic() => write!(f, "({e})"),
            e => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for TaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaExpr::Bool(b) => write!(f, "{b}"),
            TaExpr::Int(i) => write!(f, "{i}"),
            TaExpr::Var(v) => f.write_str(v),
            TaExpr::Field(n) => write!(f, "{REQUESTER}.{n}"),
            TaExpr::Loc { process, location } => write!(f, "{process}.{location}"),
            TaExpr::Not(e) => write!(f, "!{}", Operand(e)),
            TaExpr::Bin(op @ (BinOp::Max | BinOp::Min), l, r) => {
                let cmp = if *op == BinOp::Max { ">=" } else { "<=" };
                let (l, r) = (Operand(l), Operand(r));
                write!(f, "({l}{cmp}{r}?{l}:{r})")
            }
            TaExpr::Bin(BinOp::Implies, l, r) => write!(f, "{} imply {}", Operand(l), Operand(r)),
            TaExpr::Bin(op, l, r) => write!(f, "{}{}{}", Operand(l), op.symbol(), Operand(r)),
        }
    }
}

/// Edge guard as a list of conjuncts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Conjunction(pub Vec<TaExpr>);

impl Conjunction {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, e: TaExpr) {
        if !self.0.contains(&e) {
            self.0.push(e);
        }
    }

    pub fn eval(&self, v: &dyn Valuation) -> Result<bool, String> {
        for c in &self.0 {
            if c.eval(v)? == 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Conjuncts joined by `&&`; compound conjuncts are parenthesized. The
/// empty conjunction prints as `true`.
impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("&&")?;
            }
            if c.is_atomic() {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c})")?;
            }
        }
        Ok(())
    }
}
