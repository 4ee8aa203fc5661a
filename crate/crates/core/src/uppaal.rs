//! UPPAAL model (`.xml`) and query (`.q`) files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{BinOp, DataType};
use crate::syntax::{is_identifier, Cursor, ParseError, Tok};
use crate::tagen::{Network, Query, QueryCategory, QueryForm, TaExpr, Template, VarRole, REQUESTER};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UppaalError {
    #[error("`{0}` is not usable as an UPPAAL identifier")]
    BadName(String),
    #[error("query line {line}: {source}")]
    Query {
        line: usize,
        #[source]
        source: ParseError,
    },
}

const KEYWORDS: &[&str] = &[
    "after_update", "and", "before_update", "bool", "break", "broadcast", "case", "chan", "clock",
    "commit", "committed", "const", "continue", "default", "do", "double", "else", "exists",
    "exit", "false", "for", "forall", "guard", "hybrid", "if", "imply", "init", "int", "meta",
    "not", "or", "priority", "process", "progress", "return", "scalar", "select", "spawn",
    "state", "string", "struct", "sum", "switch", "sync", "system", "trans", "true", "typedef",
    "urgent", "void", "while",
];

fn check_name(n: &str) -> Result<(), UppaalError> {
    if is_identifier(n) && !KEYWORDS.contains(&n) {
        Ok(())
    } else {
        Err(UppaalError::BadName(n.to_string()))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn type_comment(t: &DataType) -> Option<String> {
    match t {
        DataType::Enum { name, values } => Some(format!(
            "{name}: {}",
            values
                .iter()
                .enumerate()
                .map(|(i, v)| format!("{v}={}", i + 1))
                .collect::<Vec<_>>()
                .join(", ")
        )),
        DataType::Double => Some("fixed point".into()),
        DataType::String => Some("string code".into()),
        _ => None,
    }
}

fn global_declarations(net: &Network) -> Result<String, UppaalError> {
    let d = &net.decls;
    let mut out = String::new();
    if !d.channels.is_empty() {
        for c in &d.channels {
            check_name(c)?;
        }
        out += "// Request and response channels\n";
        writeln!(out, "chan {};", d.channels.join(", ")).unwrap();
    }
    if !d.consts.is_empty() {
        out += "\n// Enum tags\n";
        for c in &d.consts {
            check_name(&c.name)?;
            writeln!(out, "const int {} = {}; // {}", c.name, c.value, c.comment).unwrap();
        }
    }
    if !d.encoding.strings.is_empty() {
        out += "\n// String codes:";
        for (s, code) in &d.encoding.strings {
            write!(out, " {s:?}={code}").unwrap();
        }
        out += "\n";
    }

    let sections = [
        (VarRole::InputAvailability, "Availability of inputs"),
        (VarRole::OutputAvailability, "Availability of outputs"),
        (VarRole::Parameter, "Parameters"),
        (VarRole::Path, "Path accumulators"),
        (VarRole::Legal, "Legal checks"),
    ];
    for (role, title) in sections {
        let vars: Vec<_> = d.vars.iter().filter(|v| v.role == role).collect();
        if vars.is_empty() {
            continue;
        }
        writeln!(out, "\n// {title}").unwrap();
        if role == VarRole::Path {
            writeln!(out, "// prices are scaled by {}", d.encoding.scale).unwrap();
        }
        for v in vars {
            check_name(&v.name)?;
            let ty = if v.is_bool() { "bool" } else { "int" };
            write!(out, "{ty} {}", v.name).unwrap();
            match (v.init, v.is_bool()) {
                (Some(i), true) => write!(out, " = {}", i != 0).unwrap(),
                (Some(i), false) => write!(out, " = {i}").unwrap(),
                (None, _) => {}
            }
            out += ";";
            let note = match (v.default, role == VarRole::Parameter) {
                (None, true) => Some("binding required".to_string()),
                _ => None,
            };
            let ty_note = if role == VarRole::Parameter { type_comment(&v.dtype) } else { None };
            let notes: Vec<String> = ty_note.into_iter().chain(note).collect();
            if !notes.is_empty() {
                write!(out, " // {}", notes.join("; ")).unwrap();
            }
            out += "\n";
        }
    }

    if !d.requester.is_empty() {
        out += "\n// Requester context\n";
        for f in &d.requester {
            check_name(&f.name)?;
            if let Some(c) = type_comment(&f.dtype) {
                writeln!(out, "// {}: {c}", f.name).unwrap();
            }
        }
        let fields: Vec<String> = d
            .requester
            .iter()
            .map(|f| {
                let ty = if f.dtype == DataType::Bool { "bool" } else { "int" };
                format!("{ty} {};", f.name)
            })
            .collect();
        writeln!(out, "typedef struct {{ {} }} {REQUESTER}Type;", fields.join(" ")).unwrap();
        let inits: Option<Vec<String>> = d
            .requester
            .iter()
            .map(|f| {
                f.init.map(|i| {
                    if f.dtype == DataType::Bool {
                        (i != 0).to_string()
                    } else {
                        i.to_string()
                    }
                })
            })
            .collect();
        match inits {
            Some(v) => writeln!(out, "{REQUESTER}Type {REQUESTER} = {{ {} }};", v.join(", ")).unwrap(),
            None => writeln!(out, "{REQUESTER}Type {REQUESTER};").unwrap(),
        }
    }
    Ok(out)
}

fn template_xml(t: &Template, next_id: &mut usize, out: &mut String) -> Result<(), UppaalError> {
    check_name(&t.name)?;
    out.push_str("  <template>\n");
    writeln!(out, "    <name>{}</name>", escape(&t.name)).unwrap();
    if t.clocks.is_empty() {
        out.push_str("    <declaration/>\n");
    } else {
        for c in &t.clocks {
            check_name(c)?;
        }
        writeln!(out, "    <declaration>clock {};</declaration>", t.clocks.join(", ")).unwrap();
    }
    let base = *next_id;
    let id = |loc: &str| {
        t.locations
            .iter()
            .position(|l| l.id == loc)
            .map(|i| format!("id{}", base + i))
            .expect("edge endpoints exist")
    };
    for (i, l) in t.locations.iter().enumerate() {
        check_name(&l.id)?;
        let (x, y) = ((i % 8) as i64 * 150, (i / 8) as i64 * 120);
        writeln!(out, "    <location id=\"id{}\" x=\"{x}\" y=\"{y}\">", base + i).unwrap();
        writeln!(out, "      <name x=\"{}\" y=\"{}\">{}</name>", x - 20, y - 30, escape(&l.id)).unwrap();
        if let Some(inv) = &l.invariant {
            writeln!(
                out,
                "      <label kind=\"invariant\" x=\"{}\" y=\"{}\">{}</label>",
                x - 20,
                y + 15,
                escape(&format!("{}<={}", inv.clock, inv.bound))
            )
            .unwrap();
        }
        if l.committed {
            out.push_str("      <committed/>\n");
        }
        out.push_str("    </location>\n");
    }
    *next_id += t.locations.len();
    writeln!(out, "    <init ref=\"{}\"/>", id(&t.initial)).unwrap();
    for e in &t.edges {
        out.push_str("    <transition>\n");
        writeln!(out, "      <source ref=\"{}\"/>", id(&e.source)).unwrap();
        writeln!(out, "      <target ref=\"{}\"/>", id(&e.target)).unwrap();
        if let Some(s) = &e.select {
            writeln!(out, "      <label kind=\"select\">{}</label>", escape(s)).unwrap();
        }
        if !e.guard.is_empty() {
            writeln!(out, "      <label kind=\"guard\">{}</label>", escape(&e.guard.to_string())).unwrap();
        }
        if let Some(s) = &e.sync {
            writeln!(out, "      <label kind=\"synchronisation\">{}</label>", escape(&s.to_string())).unwrap();
        }
        if !e.updates.is_empty() {
            writeln!(out, "      <label kind=\"assignment\">{}</label>", escape(&e.update_text())).unwrap();
        }
        out.push_str("    </transition>\n");
    }
    out.push_str("  </template>\n");
    Ok(())
}

/// The model as an UPPAAL 4.x flat-system document. Identical networks give
/// byte-identical text.
pub fn export_model(net: &Network) -> Result<String, UppaalError> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    out.push_str(
        "<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' \
         'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>\n",
    );
    out.push_str("<nta>\n");
    writeln!(out, "  <declaration>{}</declaration>", escape(&global_declarations(net)?)).unwrap();
    let mut next_id = 0;
    for t in &net.templates {
        template_xml(t, &mut next_id, &mut out)?;
    }
    let mut system = String::new();
    let mut instances = Vec::new();
    for (inst, tmpl) in &net.system {
        check_name(inst)?;
        if inst != tmpl {
            writeln!(system, "{inst} = {tmpl}();").unwrap();
        }
        instances.push(inst.as_str());
    }
    writeln!(system, "system {};", instances.join(", ")).unwrap();
    writeln!(out, "  <system>{}</system>", escape(&system)).unwrap();
    out.push_str("</nta>\n");
    Ok(out)
}

/// One query per line, each category introduced by a `//` comment.
pub fn export_queries(qs: &[Query]) -> String {
    let mut out = String::new();
    let mut last = None;
    for q in qs {
        if last != Some(q.category) {
            writeln!(out, "// {}", q.category.label()).unwrap();
            last = Some(q.category);
        }
        writeln!(out, "{}", q.text).unwrap();
    }
    out
}

struct QueryParser<'a> {
    cur: &'a mut Cursor,
}

impl QueryParser<'_> {
    fn expr(&mut self) -> Result<TaExpr, ParseError> {
        let l = self.or()?;
        if self.cur.eat_keyword("imply") {
            return Ok(TaExpr::bin(BinOp::Implies, l, self.expr()?));
        }
        Ok(l)
    }

    fn or(&mut self) -> Result<TaExpr, ParseError> {
        let mut l = self.and()?;
        while self.cur.eat(&Tok::OrOr) || self.cur.eat_keyword("or") {
            l = TaExpr::bin(BinOp::Or, l, self.and()?);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<TaExpr, ParseError> {
        let mut l = self.cmp()?;
        while self.cur.eat(&Tok::AndAnd) || self.cur.eat_keyword("and") {
            l = TaExpr::bin(BinOp::And, l, self.cmp()?);
        }
        Ok(l)
    }

    fn cmp(&mut self) -> Result<TaExpr, ParseError> {
        let l = self.sum()?;
        let op = match self.cur.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(l),
        };
        self.cur.next();
        Ok(TaExpr::bin(op, l, self.sum()?))
    }

    fn sum(&mut self) -> Result<TaExpr, ParseError> {
        let mut l = self.product()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(l),
            };
            self.cur.next();
            l = TaExpr::bin(op, l, self.product()?);
        }
    }

    fn product(&mut self) -> Result<TaExpr, ParseError> {
        let mut l = self.unary()?;
        while self.cur.eat(&Tok::Star) {
            l = TaExpr::bin(BinOp::Mul, l, self.unary()?);
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<TaExpr, ParseError> {
        if self.cur.eat(&Tok::Bang) || self.cur.eat_keyword("not") {
            return Ok(TaExpr::not(self.unary()?));
        }
        if self.cur.eat(&Tok::Minus) {
            return match self.unary()? {
                TaExpr::Int(i) => Ok(TaExpr::Int(-i)),
                e => Ok(TaExpr::bin(BinOp::Sub, TaExpr::Int(0), e)),
            };
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<TaExpr, ParseError> {
        match self.cur.peek().clone() {
            Tok::Int(i) => {
                self.cur.next();
                Ok(TaExpr::Int(i))
            }
            Tok::LParen => {
                self.cur.next();
                let e = self.expr()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.cur.next();
                Ok(TaExpr::Bool(s == "true"))
            }
            Tok::Ident(s) if !matches!(s.as_str(), "imply" | "and" | "or" | "not") => {
                self.cur.next();
                if self.cur.eat(&Tok::Dot) {
                    let (member, _) = self.cur.expect_ident()?;
                    if s == REQUESTER {
                        Ok(TaExpr::Field(member))
                    } else {
                        Ok(TaExpr::loc(s, member))
                    }
                } else {
                    Ok(TaExpr::Var(s))
                }
            }
            _ => Err(self.cur.unexpected("expression")),
        }
    }
}

/// Parses one query line of the `E<>` / `A[]` subset.
pub fn parse_query(line: &str, category: QueryCategory) -> Result<Query, ParseError> {
    let mut cur = Cursor::new(line)?;
    let form = if cur.at_keyword("E") {
        cur.next();
        cur.expect(&Tok::NoOrder)?;
        QueryForm::Exists(QueryParser { cur: &mut cur }.expr()?)
    } else if cur.at_keyword("A") {
        cur.next();
        cur.expect(&Tok::LBracket)?;
        cur.expect(&Tok::RBracket)?;
        match (QueryParser { cur: &mut cur }).expr()? {
            TaExpr::Bin(BinOp::Implies, ante, cons) => QueryForm::Always {
                ante: *ante,
                cons: *cons,
            },
            cons => QueryForm::Always {
                ante: TaExpr::Bool(true),
                cons,
            },
        }
    } else {
        return Err(cur.unexpected("`E<>` or `A[]`"));
    };
    cur.expect_eof()?;
    Ok(Query {
        category,
        form,
        text: line.trim().to_string(),
    })
}

/// Parses a query document. A comment naming a category applies to the
/// queries after it; other comments and blank lines are skipped.
pub fn parse_queries(text: &str) -> Result<Vec<Query>, UppaalError> {
    let mut category = QueryCategory::Reachability;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix("//") {
            if let Some(cat) = QueryCategory::from_label(c.trim()) {
                category = cat;
            }
            continue;
        }
        out.push(parse_query(line, category).map_err(|source| UppaalError::Query { line: i + 1, source })?);
    }
    Ok(out)
}
