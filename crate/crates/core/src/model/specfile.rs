//! Textual service-spec format.
//!
//! ```text
//! service RepairShop {
//!   parameters {
//!     CarBroken: bool input;
//!     numberOfHours: int output where numberOfHours>=0;
//!   }
//!   attributes {}
//!   context {
//!     dimensions { membership: enum Membership { caa, aaa }; }
//!     rules { ctx.membership==caa; }
//!     info {}
//!   }
//!   contract {
//!     function { name = "ReserveRS"; inputs = [CarBroken]; ... }
//!     nonfunctional { price { amount = 60; currency = dollar; unit = hour; } }
//!     legal { deposit := 300; }
//!   }
//! }
//! ```
//!
//! Sections appear in the order shown; the writer emits exactly this layout
//! so output is byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexSet;

use super::expr::{Expr, ExprParser};
use super::service::*;
use super::types::{DataType, Value};
use crate::syntax::{is_identifier, Cursor, ParseError, Pos, Tok};

/// Parses a document holding one or more `service` blocks.
pub fn parse_catalog(src: &str) -> Result<Catalog, ParseError> {
    let mut cur = Cursor::new(src)?;
    let mut cat = Catalog::default();
    while !cur.at(&Tok::Eof) {
        let pos = cur.pos();
        let svc = SpecParser::new(&mut cur).service()?;
        if cat.services.contains_key(&svc.name) {
            return Err(ParseError::Duplicate {
                pos,
                name: svc.name,
            });
        }
        cat.insert(svc);
    }
    Ok(cat)
}

/// Parses a document holding exactly one `service` block.
pub fn parse_service_spec(src: &str) -> Result<ConfiguredService, ParseError> {
    let mut cur = Cursor::new(src)?;
    let svc = SpecParser::new(&mut cur).service()?;
    cur.expect_eof()?;
    Ok(svc)
}

struct SpecParser<'a> {
    cur: &'a mut Cursor,
    enums: BTreeMap<String, DataType>,
}

fn dup(pos: Pos, name: &str) -> ParseError {
    ParseError::Duplicate {
        pos,
        name: name.to_string(),
    }
}

impl<'a> SpecParser<'a> {
    fn new(cur: &'a mut Cursor) -> Self {
        SpecParser {
            cur,
            enums: BTreeMap::new(),
        }
    }

    fn name(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.cur.pos();
        match self.cur.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                self.cur.next();
                Ok((s, pos))
            }
            _ => Err(self.cur.unexpected("name")),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.cur.peek().clone() {
            Tok::Str(s) => {
                self.cur.next();
                Ok(s)
            }
            _ => Err(self.cur.unexpected("string")),
        }
    }

    fn u64(&mut self) -> Result<u64, ParseError> {
        match self.cur.peek().clone() {
            Tok::Int(v) if v >= 0 => {
                self.cur.next();
                Ok(v as u64)
            }
            _ => Err(self.cur.unexpected("non-negative integer")),
        }
    }

    fn bool(&mut self) -> Result<bool, ParseError> {
        if self.cur.eat_keyword("true") {
            Ok(true)
        } else if self.cur.eat_keyword("false") {
            Ok(false)
        } else {
            Err(self.cur.unexpected("`true` or `false`"))
        }
    }

    fn field(&mut self, key: &str) -> Result<(), ParseError> {
        self.cur.expect_keyword(key)?;
        self.cur.expect(&Tok::Assign)?;
        Ok(())
    }

    fn end_field(&mut self) -> Result<(), ParseError> {
        self.cur.expect(&Tok::Semi)?;
        Ok(())
    }

    fn name_list(&mut self) -> Result<IndexSet<String>, ParseError> {
        self.cur.expect(&Tok::LBracket)?;
        let mut out = IndexSet::new();
        while !self.cur.at(&Tok::RBracket) {
            let (n, pos) = self.name()?;
            if !out.insert(n.clone()) {
                return Err(dup(pos, &n));
            }
            if !self.cur.eat(&Tok::Comma) {
                break;
            }
        }
        self.cur.expect(&Tok::RBracket)?;
        Ok(out)
    }

    fn dtype(&mut self) -> Result<DataType, ParseError> {
        let pos = self.cur.pos();
        if self.cur.eat(&Tok::LParen) {
            let mut tys = vec![self.dtype()?];
            while self.cur.eat(&Tok::Comma) {
                tys.push(self.dtype()?);
            }
            self.cur.expect(&Tok::RParen)?;
            return Ok(DataType::Tuple(tys));
        }
        let (word, _) = self.cur.expect_ident()?;
        Ok(match word.as_str() {
            "bool" => DataType::Bool,
            "int" => DataType::Int,
            "double" => DataType::Double,
            "string" => DataType::String,
            "time" => DataType::Time,
            "currency" => DataType::Currency,
            "unit" => DataType::PricingUnit,
            "enum" => {
                let (name, npos) = self.cur.expect_ident()?;
                if self.cur.eat(&Tok::LBrace) {
                    let mut values = Vec::new();
                    while !self.cur.at(&Tok::RBrace) {
                        values.push(self.cur.expect_ident()?.0);
                        if !self.cur.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.cur.expect(&Tok::RBrace)?;
                    let t = DataType::Enum {
                        name: name.clone(),
                        values,
                    };
                    match self.enums.get(&name) {
                        Some(prev) if *prev != t => return Err(dup(npos, &name)),
                        _ => {
                            self.enums.insert(name, t.clone());
                        }
                    }
                    t
                } else {
                    self.enums
                        .get(&name)
                        .cloned()
                        .ok_or(ParseError::UnknownType { pos: npos, name })?
                }
            }
            _ => return Err(ParseError::UnknownType { pos, name: word }),
        })
    }

    fn literal(&mut self) -> Result<Value, ParseError> {
        let neg = self.cur.eat(&Tok::Minus);
        let v = match self.cur.peek().clone() {
            Tok::Int(v) => Value::Int(if neg { -v } else { v }),
            Tok::Real(v) => Value::real(if neg { -v } else { v }),
            _ if neg => return Err(self.cur.unexpected("number")),
            Tok::Str(s) => Value::Str(s),
            Tok::Ident(s) if s == "true" => Value::Bool(true),
            Tok::Ident(s) if s == "false" => Value::Bool(false),
            Tok::Ident(s) => Value::Sym(s),
            Tok::LParen => {
                self.cur.next();
                let mut vs = vec![self.literal()?];
                while self.cur.eat(&Tok::Comma) {
                    vs.push(self.literal()?);
                }
                self.cur.expect(&Tok::RParen)?;
                return Ok(Value::Tuple(vs));
            }
            _ => return Err(self.cur.unexpected("literal")),
        };
        self.cur.next();
        Ok(v)
    }

    fn expr(&mut self, scope: &ConfiguredService) -> Result<Expr, ParseError> {
        ExprParser {
            cur: self.cur,
            scope,
        }
        .expr()
    }

    /// `{ expr; expr; }`
    fn expr_block(&mut self, scope: &ConfiguredService) -> Result<IndexSet<Expr>, ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        let mut out = IndexSet::new();
        while !self.cur.eat(&Tok::RBrace) {
            out.insert(self.expr(scope)?);
            self.end_field()?;
        }
        Ok(out)
    }

    fn service(&mut self) -> Result<ConfiguredService, ParseError> {
        self.cur.expect_keyword("service")?;
        let (name, _) = self.name()?;
        self.cur.expect(&Tok::LBrace)?;
        let mut svc = ConfiguredService::new(name, ServiceFunction::new("", ""));

        if self.cur.eat_keyword("parameters") {
            self.parameters(&mut svc)?;
        }
        if self.cur.eat_keyword("attributes") {
            self.attributes(&mut svc)?;
        }
        if self.cur.eat_keyword("context") {
            self.context(&mut svc)?;
        }
        self.cur.expect_keyword("contract")?;
        self.contract(&mut svc)?;
        self.cur.expect(&Tok::RBrace)?;
        Ok(svc)
    }

    fn parameters(&mut self, svc: &mut ConfiguredService) -> Result<(), ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        while !self.cur.eat(&Tok::RBrace) {
            let (name, pos) = self.name()?;
            self.cur.expect(&Tok::Colon)?;
            let dtype = self.dtype()?;
            let direction = if self.cur.eat_keyword("input") {
                Direction::Input
            } else if self.cur.eat_keyword("output") {
                Direction::Output
            } else if self.cur.eat_keyword("inout") {
                Direction::InOut
            } else {
                return Err(self.cur.unexpected("`input`, `output`, or `inout`"));
            };
            if svc.params.contains_key(&name) {
                return Err(dup(pos, &name));
            }
            svc.params.insert(
                name.clone(),
                Parameter::new(name.clone(), dtype, direction),
            );
            if self.cur.eat_keyword("where") {
                let c = self.expr(svc)?;
                svc.params[&name].constraint = c;
            }
            self.end_field()?;
        }
        Ok(())
    }

    fn attributes(&mut self, svc: &mut ConfiguredService) -> Result<(), ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        while !self.cur.eat(&Tok::RBrace) {
            let (name, pos) = self.name()?;
            self.cur.expect(&Tok::Colon)?;
            let dtype = self.dtype()?;
            self.cur.expect(&Tok::Assign)?;
            let value = self.literal()?;
            self.end_field()?;
            if svc.attrs.contains_key(&name) {
                return Err(dup(pos, &name));
            }
            svc.attrs.insert(name.clone(), Attribute { name, dtype, value });
        }
        Ok(())
    }

    fn context(&mut self, svc: &mut ConfiguredService) -> Result<(), ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        if self.cur.eat_keyword("dimensions") {
            self.cur.expect(&Tok::LBrace)?;
            while !self.cur.eat(&Tok::RBrace) {
                let (dim, pos) = self.name()?;
                self.cur.expect(&Tok::Colon)?;
                let t = self.dtype()?;
                self.end_field()?;
                if svc.context.info.typing.insert(dim.clone(), t).is_some() {
                    return Err(dup(pos, &dim));
                }
            }
        }
        if self.cur.eat_keyword("rules") {
            let rules = self.expr_block(svc)?;
            svc.context.rules = rules;
        }
        if self.cur.eat_keyword("info") {
            self.cur.expect(&Tok::LBrace)?;
            while !self.cur.eat(&Tok::RBrace) {
                let (dim, pos) = self.name()?;
                self.cur.expect(&Tok::Assign)?;
                let v = self.literal()?;
                self.end_field()?;
                if svc.context.info.entries.insert(dim.clone(), v).is_some() {
                    return Err(dup(pos, &dim));
                }
            }
        }
        self.cur.expect(&Tok::RBrace)?;
        Ok(())
    }

    fn contract(&mut self, svc: &mut ConfiguredService) -> Result<(), ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        self.cur.expect_keyword("function")?;
        self.function(svc)?;
        if self.cur.eat_keyword("nonfunctional") {
            self.nonfunctional(svc)?;
        }
        if self.cur.eat_keyword("legal") {
            self.cur.expect(&Tok::LBrace)?;
            while !self.cur.eat(&Tok::RBrace) {
                let rule = match (self.cur.peek().clone(), self.cur.peek_at(1)) {
                    (Tok::Ident(target), Tok::Define) => {
                        let pos = self.cur.pos();
                        if !svc.params.contains_key(&target) {
                            return Err(ParseError::UnknownName { pos, name: target });
                        }
                        self.cur.next();
                        self.cur.next();
                        LegalRule::Effect {
                            target,
                            value: self.expr(svc)?,
                        }
                    }
                    _ => LegalRule::Check(self.expr(svc)?),
                };
                self.end_field()?;
                svc.contract.legal.insert(rule);
            }
        }
        self.cur.expect(&Tok::RBrace)?;
        Ok(())
    }

    fn function(&mut self, svc: &mut ConfiguredService) -> Result<(), ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        let f = &mut svc.contract.function;
        self.field("name")?;
        f.name = self.string()?;
        self.end_field()?;
        self.field("inputs")?;
        f.inputs = self.name_list()?;
        self.end_field()?;
        self.field("address")?;
        f.addresses = if self.cur.at(&Tok::LBracket) {
            self.name_list()?
        } else {
            IndexSet::from([self.string()?])
        };
        self.end_field()?;
        self.field("result_name")?;
        f.result_name = self.string()?;
        self.end_field()?;
        self.field("outputs")?;
        f.outputs = self.name_list()?;
        self.end_field()?;

        let scope = svc.clone();
        if self.cur.eat_keyword("pre") {
            svc.contract.function.pre = self.expr_block(&scope)?;
        }
        if self.cur.eat_keyword("post") {
            svc.contract.function.post = self.expr_block(&scope)?;
        }
        if self.cur.at_keyword("post_observable") {
            self.field("post_observable")?;
            svc.contract.function.post_observable = self.bool()?;
            self.end_field()?;
        }
        if self.cur.at_keyword("channels") {
            let pos = self.cur.pos();
            self.field("channels")?;
            let names = self.name_list()?;
            if names.len() != 2 {
                return Err(ParseError::syntax(pos, "channels needs [request, response]"));
            }
            svc.contract.function.channels = Some((names[0].clone(), names[1].clone()));
            self.end_field()?;
        }
        self.cur.expect(&Tok::RBrace)?;
        Ok(())
    }

    fn nonfunctional(&mut self, svc: &mut ConfiguredService) -> Result<(), ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        let scope = svc.clone();
        let mut nf = Nonfunctional::default();
        if self.cur.at_keyword("safety_time") {
            self.field("safety_time")?;
            nf.safety_time = Some(self.u64()?);
            self.end_field()?;
        }
        if self.cur.eat_keyword("safety_data") {
            nf.safety_data = Some(self.expr_block(&scope)?);
        }
        if self.cur.at_keyword("security") {
            self.field("security")?;
            nf.security = Some(self.name_list()?);
            self.end_field()?;
        }
        if self.cur.at_keyword("reliability") {
            self.field("reliability")?;
            nf.reliability = Some(self.u64()?);
            self.end_field()?;
        }
        if self.cur.at_keyword("availability") {
            self.field("availability")?;
            nf.availability = Some(self.u64()?);
            self.end_field()?;
        }
        if self.cur.eat_keyword("price") {
            self.cur.expect(&Tok::LBrace)?;
            self.field("amount")?;
            let amount = self.expr(&scope)?;
            self.end_field()?;
            self.field("currency")?;
            let (currency, _) = self.name()?;
            self.end_field()?;
            self.field("unit")?;
            let (unit, _) = self.name()?;
            self.end_field()?;
            let per = if self.cur.at_keyword("per") {
                self.field("per")?;
                let (p, pos) = self.cur.expect_ident()?;
                if !scope.params.contains_key(&p) {
                    return Err(ParseError::UnknownName { pos, name: p });
                }
                self.end_field()?;
                Some(p)
            } else {
                None
            };
            self.cur.expect(&Tok::RBrace)?;
            nf.price = Some(Price {
                amount,
                currency,
                unit,
                per,
            });
        }
        if self.cur.eat_keyword("trust") {
            self.cur.expect(&Tok::LBrace)?;
            let mut tr = ProviderTrust::default();
            if self.cur.eat_keyword("ce") {
                tr.ce = self.recommendations()?;
            }
            if self.cur.at_keyword("pg") {
                self.field("pg")?;
                tr.pg = self.bool()?;
                self.end_field()?;
            }
            if self.cur.eat_keyword("re") {
                tr.re = self.recommendations()?;
            }
            self.cur.expect(&Tok::RBrace)?;
            nf.trust = Some(tr);
        }
        self.cur.expect(&Tok::RBrace)?;
        svc.contract.nonfunctional = nf;
        Ok(())
    }

    fn recommendations(&mut self) -> Result<Recommendations, ParseError> {
        self.cur.expect(&Tok::LBrace)?;
        let mut out = Recommendations::new();
        while !self.cur.eat(&Tok::RBrace) {
            let (who, pos) = self.name()?;
            self.cur.expect(&Tok::Assign)?;
            let grade = match self.cur.peek().clone() {
                Tok::Int(v) if (0..=255).contains(&v) => {
                    self.cur.next();
                    TrustGrade(v as u8)
                }
                _ => return Err(self.cur.unexpected("trust grade")),
            };
            self.end_field()?;
            if out.insert(who.clone(), grade).is_some() {
                return Err(dup(pos, &who));
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Writing

fn name(s: &str) -> String {
    if is_identifier(s) {
        s.to_string()
    } else {
        format!("{s:?}")
    }
}

fn list<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    let v: Vec<String> = items.into_iter().map(|s| name(s)).collect();
    format!("[{}]", v.join(", "))
}

fn exprs(out: &mut String, indent: &str, key: &str, es: &IndexSet<Expr>) {
    if es.is_empty() {
        let _ = writeln!(out, "{indent}{key} {{}}");
        return;
    }
    let _ = writeln!(out, "{indent}{key} {{");
    for e in es {
        let _ = writeln!(out, "{indent}  {e};");
    }
    let _ = writeln!(out, "{indent}}}");
}

fn recs(out: &mut String, key: &str, r: &Recommendations) {
    if r.is_empty() {
        let _ = writeln!(out, "        {key} {{}}");
        return;
    }
    let _ = writeln!(out, "        {key} {{");
    for (who, g) in r {
        let _ = writeln!(out, "          {} = {g};", name(who));
    }
    let _ = writeln!(out, "        }}");
}

/// Serializes one service in the canonical layout.
pub fn write_service(s: &ConfiguredService) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "service {} {{", name(&s.name));

    if s.params.is_empty() {
        out.push_str("  parameters {}\n");
    } else {
        out.push_str("  parameters {\n");
        for p in s.params.values() {
            let _ = write!(out, "    {}: {} {}", name(&p.name), p.dtype, p.direction.keyword());
            if !p.constraint.is_true() {
                let _ = write!(out, " where {}", p.constraint);
            }
            out.push_str(";\n");
        }
        out.push_str("  }\n");
    }

    if s.attrs.is_empty() {
        out.push_str("  attributes {}\n");
    } else {
        out.push_str("  attributes {\n");
        for a in s.attrs.values() {
            let _ = writeln!(out, "    {}: {} = {};", name(&a.name), a.dtype, a.value);
        }
        out.push_str("  }\n");
    }

    out.push_str("  context {\n");
    let info = &s.context.info;
    if info.typing.is_empty() {
        out.push_str("    dimensions {}\n");
    } else {
        out.push_str("    dimensions {\n");
        for (d, t) in &info.typing {
            let _ = writeln!(out, "      {}: {t};", name(d));
        }
        out.push_str("    }\n");
    }
    exprs(&mut out, "    ", "rules", &s.context.rules);
    if info.entries.is_empty() {
        out.push_str("    info {}\n");
    } else {
        out.push_str("    info {\n");
        for (d, v) in &info.entries {
            let _ = writeln!(out, "      {} = {v};", name(d));
        }
        out.push_str("    }\n");
    }
    out.push_str("  }\n");

    let f = &s.contract.function;
    out.push_str("  contract {\n    function {\n");
    let _ = writeln!(out, "      name = {:?};", f.name);
    let _ = writeln!(out, "      inputs = {};", list(&f.inputs));
    if f.addresses.len() == 1 {
        let _ = writeln!(out, "      address = {:?};", f.addresses[0]);
    } else {
        let addrs: Vec<String> = f.addresses.iter().map(|a| format!("{a:?}")).collect();
        let _ = writeln!(out, "      address = [{}];", addrs.join(", "));
    }
    let _ = writeln!(out, "      result_name = {:?};", f.result_name);
    let _ = writeln!(out, "      outputs = {};", list(&f.outputs));
    exprs(&mut out, "      ", "pre", &f.pre);
    exprs(&mut out, "      ", "post", &f.post);
    let _ = writeln!(out, "      post_observable = {};", f.post_observable);
    if let Some((req, resp)) = &f.channels {
        let _ = writeln!(out, "      channels = [{}, {}];", name(req), name(resp));
    }
    out.push_str("    }\n");

    let nf = &s.contract.nonfunctional;
    if nf.is_empty() {
        out.push_str("    nonfunctional {}\n");
    } else {
        out.push_str("    nonfunctional {\n");
        if let Some(t) = nf.safety_time {
            let _ = writeln!(out, "      safety_time = {t};");
        }
        if let Some(d) = &nf.safety_data {
            exprs(&mut out, "      ", "safety_data", d);
        }
        if let Some(sec) = &nf.security {
            let quoted: Vec<String> = sec.iter().map(|s| format!("{s:?}")).collect();
            let _ = writeln!(out, "      security = [{}];", quoted.join(", "));
        }
        if let Some(r) = nf.reliability {
            let _ = writeln!(out, "      reliability = {r};");
        }
        if let Some(a) = nf.availability {
            let _ = writeln!(out, "      availability = {a};");
        }
        if let Some(p) = &nf.price {
            out.push_str("      price {\n");
            let _ = writeln!(out, "        amount = {};", p.amount);
            let _ = writeln!(out, "        currency = {};", name(&p.currency));
            let _ = writeln!(out, "        unit = {};", name(&p.unit));
            if let Some(per) = &p.per {
                let _ = writeln!(out, "        per = {per};");
            }
            out.push_str("      }\n");
        }
        if let Some(tr) = &nf.trust {
            out.push_str("      trust {\n");
            recs(&mut out, "ce", &tr.ce);
            let _ = writeln!(out, "        pg = {};", tr.pg);
            recs(&mut out, "re", &tr.re);
            out.push_str("      }\n");
        }
        out.push_str("    }\n");
    }

    if s.contract.legal.is_empty() {
        out.push_str("    legal {}\n");
    } else {
        out.push_str("    legal {\n");
        for rule in &s.contract.legal {
            let _ = writeln!(out, "      {rule};");
        }
        out.push_str("    }\n");
    }
    out.push_str("  }\n}\n");
    out
}

pub fn write_catalog(c: &Catalog) -> String {
    c.services
        .values()
        .map(write_service)
        .collect::<Vec<_>>()
        .join("\n")
}
