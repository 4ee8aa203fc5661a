//! Composition expressions over catalog services.
//!
//! ```text
//! expr    := operand (op operand)*        op ∈ { >>  ||  |>  <>  ~ }
//! operand := NAME | "(" expr ")"
//!          | "if" "(" constraint ")" operand "else" operand
//!          | "while" "(" constraint ")" operand
//! ```
//!
//! All binary operators share one precedence level and associate to the left.

use std::fmt;

use crate::model::{Catalog, Expr, ExprParser};
use crate::syntax::{Cursor, ParseError, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompOp {
    Seq,
    Par,
    Priority,
    NoOrder,
    NonDet,
}

impl CompOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Seq => ">>",
            CompOp::Par => "||",
            CompOp::Priority => "|>",
            CompOp::NoOrder => "<>",
            CompOp::NonDet => "~",
        }
    }

    fn from_tok(t: &Tok) -> Option<CompOp> {
        Some(match t {
            Tok::Seq => CompOp::Seq,
            Tok::OrOr => CompOp::Par,
            Tok::Priority => CompOp::Priority,
            Tok::NoOrder => CompOp::NoOrder,
            Tok::Tilde => CompOp::NonDet,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CompositionExpr {
    Service(String),
    Binary(CompOp, Box<CompositionExpr>, Box<CompositionExpr>),
    Cond {
        cond: Expr,
        then: Box<CompositionExpr>,
        els: Box<CompositionExpr>,
    },
    Iter {
        cond: Expr,
        body: Box<CompositionExpr>,
    },
}

impl CompositionExpr {
    pub fn service(name: impl Into<String>) -> Self {
        CompositionExpr::Service(name.into())
    }

    pub fn binary(op: CompOp, l: CompositionExpr, r: CompositionExpr) -> Self {
        CompositionExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn seq(l: CompositionExpr, r: CompositionExpr) -> Self {
        Self::binary(CompOp::Seq, l, r)
    }

    pub fn par(l: CompositionExpr, r: CompositionExpr) -> Self {
        Self::binary(CompOp::Par, l, r)
    }

    pub fn cond(cond: Expr, then: CompositionExpr, els: CompositionExpr) -> Self {
        CompositionExpr::Cond {
            cond,
            then: Box::new(then),
            els: Box::new(els),
        }
    }

    pub fn iter(cond: Expr, body: CompositionExpr) -> Self {
        CompositionExpr::Iter {
            cond,
            body: Box::new(body),
        }
    }

    /// Service names in first-occurrence order.
    pub fn services(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            CompositionExpr::Service(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            CompositionExpr::Binary(_, l, r) => {
                l.collect(out);
                r.collect(out);
            }
            CompositionExpr::Cond { then, els, .. } => {
                then.collect(out);
                els.collect(out);
            }
            CompositionExpr::Iter { body, .. } => body.collect(out),
        }
    }

    /// Functional rendering, e.g. `Seq(Seq(Cond(c1,A,B),Par(C,D)),Iter(c2,F))`.
    pub fn tree(&self) -> String {
        match self {
            CompositionExpr::Service(n) => n.clone(),
            CompositionExpr::Binary(op, l, r) => {
                let name = match op {
                    CompOp::Seq => "Seq",
                    CompOp::Par => "Par",
                    CompOp::Priority => "Priority",
                    CompOp::NoOrder => "NoOrder",
                    CompOp::NonDet => "NonDet",
                };
                format!("{name}({},{})", l.tree(), r.tree())
            }
            CompositionExpr::Cond { cond, then, els } => {
                format!("Cond({cond},{},{})", then.tree(), els.tree())
            }
            CompositionExpr::Iter { cond, body } => format!("Iter({cond},{})", body.tree()),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &CompositionExpr) -> fmt::Result {
    match e {
        CompositionExpr::Service(_) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

impl fmt::Display for CompositionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompositionExpr::Service(n) => f.write_str(n),
            CompositionExpr::Binary(op, l, r) => {
                match **l {
                    CompositionExpr::Binary(..) | CompositionExpr::Service(_) => write!(f, "{l}")?,
                    _ => write_operand(f, l)?,
                }
                write!(f, " {} ", op.symbol())?;
                write_operand(f, r)
            }
            CompositionExpr::Cond { cond, then, els } => {
                write!(f, "if ({cond}) ")?;
                write_operand(f, then)?;
                f.write_str(" else ")?;
                write_operand(f, els)
            }
            CompositionExpr::Iter { cond, body } => {
                write!(f, "while ({cond}) ")?;
                write_operand(f, body)
            }
        }
    }
}

/// Parses a composition expression; every service must exist in `catalog`.
pub fn parse_composition_expr(src: &str, catalog: &Catalog) -> Result<CompositionExpr, ParseError> {
    let mut cur = Cursor::new(src)?;
    let e = CompParser {
        cur: &mut cur,
        catalog,
    }
    .expr()?;
    cur.expect_eof()?;
    Ok(e)
}

struct CompParser<'a> {
    cur: &'a mut Cursor,
    catalog: &'a Catalog,
}

impl CompParser<'_> {
    fn expr(&mut self) -> Result<CompositionExpr, ParseError> {
        let mut lhs = self.operand()?;
        while let Some(op) = CompOp::from_tok(self.cur.peek()) {
            self.cur.next();
            lhs = CompositionExpr::binary(op, lhs, self.operand()?);
        }
        Ok(lhs)
    }

    fn condition(&mut self) -> Result<Expr, ParseError> {
        self.cur.expect(&Tok::LParen)?;
        let c = ExprParser {
            cur: self.cur,
            scope: self.catalog,
        }
        .expr()?;
        self.cur.expect(&Tok::RParen)?;
        Ok(c)
    }

    fn operand(&mut self) -> Result<CompositionExpr, ParseError> {
        if self.cur.eat(&Tok::LParen) {
            let e = self.expr()?;
            self.cur.expect(&Tok::RParen)?;
            return Ok(e);
        }
        if self.cur.eat_keyword("if") {
            let cond = self.condition()?;
            let then = self.operand()?;
            self.cur.expect_keyword("else")?;
            let els = self.operand()?;
            return Ok(CompositionExpr::cond(cond, then, els));
        }
        if self.cur.eat_keyword("while") {
            let cond = self.condition()?;
            let body = self.operand()?;
            return Ok(CompositionExpr::iter(cond, body));
        }
        let pos = self.cur.pos();
        let name = match self.cur.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                self.cur.next();
                s
            }
            _ => return Err(self.cur.unexpected("service name")),
        };
        if self.catalog.get(&name).is_none() {
            return Err(ParseError::UnknownName { pos, name });
        }
        Ok(CompositionExpr::Service(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConfiguredService, ServiceFunction};

    fn catalog(names: &[&str]) -> Catalog {
        names
            .iter()
            .map(|n| ConfiguredService::new(*n, ServiceFunction::new(*n, *n)))
            .collect()
    }

    fn s(n: &str) -> CompositionExpr {
        CompositionExpr::service(n)
    }

    #[test]
    fn example_expression() {
        let cat = catalog(&["A", "B", "C", "D", "F"]);
        let e = parse_composition_expr("(if (c1) A else B) >> (C || D) >> while (c2) F", &cat).unwrap();
        assert_eq!(e.tree(), "Seq(Seq(Cond(c1,A,B),Par(C,D)),Iter(c2,F))");
        assert_eq!(
            e,
            CompositionExpr::seq(
                CompositionExpr::seq(
                    CompositionExpr::cond(Expr::var("c1"), s("A"), s("B")),
                    CompositionExpr::par(s("C"), s("D"))
                ),
                CompositionExpr::iter(Expr::var("c2"), s("F"))
            )
        );
    }

    #[test]
    fn left_association_and_parentheses() {
        let cat = catalog(&["A", "B", "C"]);
        let e = parse_composition_expr("A >> B >> C", &cat).unwrap();
        assert_eq!(e, CompositionExpr::seq(CompositionExpr::seq(s("A"), s("B")), s("C")));
        let e = parse_composition_expr("A >> (B >> C)", &cat).unwrap();
        assert_eq!(e, CompositionExpr::seq(s("A"), CompositionExpr::seq(s("B"), s("C"))));
        let e = parse_composition_expr("A || B >> C", &cat).unwrap();
        assert_eq!(e.tree(), "Seq(Par(A,B),C)");
        let e = parse_composition_expr("A ~ B |> C <> A", &cat).unwrap();
        assert_eq!(e.tree(), "NoOrder(Priority(NonDet(A,B),C),A)");
    }

    #[test]
    fn display_reparses() {
        let cat = catalog(&["A", "B", "C", "D", "F"]);
        for src in [
            "(if (c1) A else B) >> (C || D) >> while (c2) F",
            "A >> (B >> C)",
            "while (!c) (A || B)",
        ] {
            let e = parse_composition_expr(src, &cat).unwrap();
            assert_eq!(parse_composition_expr(&e.to_string(), &cat).unwrap(), e, "{e}");
        }
    }

    #[test]
    fn unknown_service() {
        let cat = catalog(&["A"]);
        assert!(matches!(
            parse_composition_expr("A >> Z", &cat),
            Err(ParseError::UnknownName { name, .. }) if name == "Z"
        ));
        assert!(matches!(parse_composition_expr("A >>", &cat), Err(ParseError::Syntax { .. })));
    }
}
