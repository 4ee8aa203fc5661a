//! Well-formedness checks for a single ConfiguredService.

use std::collections::BTreeSet;
use std::fmt;

use super::expr::{eval_bool, BinOp, Environment, EvalError, Expr};
use super::sat::{constraints_jointly_satisfiable, Domains};
use super::service::{ConfiguredService, Context, ContextInfo, LegalRule};
use super::types::{DataType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    EnumValues,
    ParamConstraint,
    Conformance,
    IllTyped,
    Unresolved,
    Signature,
    PreScope,
    PostScope,
    ContextConflict,
    LegalConflict,
    NegativePrice,
    TrustRange,
    Undecided,
}

impl ViolationKind {
    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::EnumValues => "enum-values",
            ViolationKind::ParamConstraint => "param-constraint",
            ViolationKind::Conformance => "conformance",
            ViolationKind::IllTyped => "ill-typed",
            ViolationKind::Unresolved => "unresolved",
            ViolationKind::Signature => "signature",
            ViolationKind::PreScope => "pre-scope",
            ViolationKind::PostScope => "post-scope",
            ViolationKind::ContextConflict => "context-conflict",
            ViolationKind::LegalConflict => "legal-conflict",
            ViolationKind::NegativePrice => "negative-price",
            ViolationKind::TrustRange => "trust-range",
            ViolationKind::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.message)
    }
}

struct Report<'a> {
    svc: &'a ConfiguredService,
    out: Vec<Violation>,
}

impl Report<'_> {
    fn push(&mut self, kind: ViolationKind, message: String) {
        self.out.push(Violation { kind, message });
    }

    fn bool_expr(&mut self, what: &str, e: &Expr) {
        if let Err(err) = e.check_bool(self.svc) {
            self.push(ViolationKind::IllTyped, format!("{what}: {err}"));
        }
    }

    fn names_resolve(&mut self, what: &str, e: &Expr) -> bool {
        let mut ok = true;
        for v in e.vars() {
            if !self.svc.params.contains_key(&v) {
                self.push(ViolationKind::Unresolved, format!("{what} `{e}` references unknown `{v}`"));
                ok = false;
            }
        }
        for d in e.ctx_dims() {
            if !self.svc.context.info.typing.contains_key(&d) {
                self.push(ViolationKind::Unresolved, format!("{what} `{e}` references unknown dimension `{d}`"));
                ok = false;
            }
        }
        ok
    }
}

pub(crate) fn collect_literals(es: &[&Expr]) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::new();
    for e in es {
        e.walk(&mut |n| {
            if let Expr::Lit(v) = n {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        });
    }
    out
}

/// Finite candidate domain for a name of type `t` given the literals that
/// appear in the constraints under test.
pub(crate) fn domain_for(t: &DataType, lits: &[Value]) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::new();
    let mut add = |v: Value| {
        if !out.contains(&v) {
            out.push(v);
        }
    };
    match t {
        DataType::Bool => {
            add(Value::Bool(false));
            add(Value::Bool(true));
        }
        DataType::Enum { values, .. } => values.iter().for_each(|v| add(Value::Sym(v.clone()))),
        DataType::Int | DataType::Time | DataType::Double => {
            add(Value::Int(0));
            for l in lits {
                match l {
                    Value::Int(i) => {
                        for d in [-1, 0, 1] {
                            if let Some(x) = i.checked_add(d) {
                                add(Value::Int(x));
                            }
                        }
                    }
                    Value::Real(r) if matches!(t, DataType::Double) => {
                        for d in [-1.0, 0.0, 1.0] {
                            add(Value::real(r.0 + d));
                        }
                    }
                    _ => {}
                }
            }
        }
        DataType::String => {
            lits.iter().filter(|l| matches!(l, Value::Str(_))).for_each(|l| add(l.clone()));
            add(Value::Str("\u{1}".into()));
        }
        DataType::Currency | DataType::PricingUnit => {
            lits.iter().filter(|l| matches!(l, Value::Sym(_))).for_each(|l| add(l.clone()));
            add(Value::Sym("\u{1}".into()));
        }
        DataType::Tuple(_) => {
            lits.iter().filter(|l| t.admits(l)).for_each(|l| add(l.clone()));
            add(Value::Tuple(Vec::new()));
        }
    }
    out
}

/// Candidate domains for every parameter and dimension a constraint set
/// mentions. Names without a declared type are left out.
pub fn service_domains(svc: &ConfiguredService, es: &[&Expr]) -> Domains {
    let lits = collect_literals(es);
    let mut doms = Domains::new();
    for e in es {
        for v in e.vars() {
            if let Some(p) = svc.params.get(&v) {
                doms.entry(v).or_insert_with(|| domain_for(&p.dtype, &lits));
            }
        }
        for d in e.ctx_dims() {
            if let Some(t) = svc.context.info.typing.get(&d) {
                doms.entry(format!("ctx.{d}")).or_insert_with(|| domain_for(t, &lits));
            }
        }
    }
    doms
}

fn render(es: &[&Expr]) -> String {
    es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Returns every invariant violation found in `svc`; empty means well formed.
pub fn validate_service(svc: &ConfiguredService) -> Vec<Violation> {
    let mut r = Report {
        svc,
        out: Vec::new(),
    };

    for t in svc.enum_types() {
        if let DataType::Enum { name, values } = t {
            if values.is_empty() {
                r.push(ViolationKind::EnumValues, format!("enum {name} has no values"));
            }
            let distinct: BTreeSet<&String> = values.iter().collect();
            if distinct.len() != values.len() {
                r.push(ViolationKind::EnumValues, format!("enum {name} repeats a value"));
            }
        }
    }

    for p in svc.params.values() {
        if p.constraint.is_true() {
            continue;
        }
        let others: Vec<String> = p.constraint.vars().into_iter().filter(|v| *v != p.name).collect();
        if !others.is_empty() || !p.constraint.ctx_dims().is_empty() {
            r.push(
                ViolationKind::ParamConstraint,
                format!("constraint of `{}` references other names", p.name),
            );
        } else {
            r.bool_expr(&format!("constraint of `{}`", p.name), &p.constraint);
        }
    }

    for a in svc.attrs.values() {
        if !a.dtype.admits(&a.value) {
            r.push(
                ViolationKind::Conformance,
                format!("attribute `{}` value {} is not a {}", a.name, a.value, a.dtype),
            );
        }
    }
    let info = &svc.context.info;
    for (d, v) in &info.entries {
        match info.typing.get(d) {
            None => r.push(ViolationKind::Unresolved, format!("context info for untyped dimension `{d}`")),
            Some(t) if !t.admits(v) => r.push(
                ViolationKind::Conformance,
                format!("context tag {v} for `{d}` is not a {t}"),
            ),
            _ => {}
        }
    }

    let f = svc.function();
    for i in &f.inputs {
        if !svc.params.get(i).is_some_and(|p| p.direction.is_input()) {
            r.push(ViolationKind::Signature, format!("function input `{i}` is not a declared input parameter"));
        }
    }
    for o in &f.outputs {
        if !svc.params.get(o).is_some_and(|p| p.direction.is_output()) {
            r.push(ViolationKind::Signature, format!("function output `{o}` is not a declared output parameter"));
        }
    }

    for e in &svc.context.rules {
        if r.names_resolve("context rule", e) {
            r.bool_expr("context rule", e);
        }
    }
    for e in &f.pre {
        if r.names_resolve("precondition", e) {
            r.bool_expr("precondition", e);
            for v in e.vars() {
                if !svc.params[&v].direction.is_input() {
                    r.push(ViolationKind::PreScope, format!("precondition `{e}` reads non-input `{v}`"));
                }
            }
        }
    }
    for e in &f.post {
        if r.names_resolve("postcondition", e) {
            r.bool_expr("postcondition", e);
        }
    }
    let nf = svc.nonfunctional();
    for e in nf.safety_data.iter().flatten() {
        if r.names_resolve("safety condition", e) {
            r.bool_expr("safety condition", e);
        }
    }
    let mut legal: Vec<Expr> = Vec::new();
    for rule in &svc.contract.legal {
        let e = match rule {
            LegalRule::Check(e) => e.clone(),
            LegalRule::Effect { target, value } => {
                Expr::bin(BinOp::Eq, Expr::Var(target.clone()), value.clone())
            }
        };
        if r.names_resolve("legal rule", &e) {
            r.bool_expr("legal rule", &e);
            if rule.as_constraint().is_some() {
                legal.push(e);
            }
        }
    }

    let well_typed = !r.out.iter().any(|v| {
        matches!(v.kind, ViolationKind::IllTyped | ViolationKind::Unresolved)
    });

    if well_typed {
        let rules: Vec<&Expr> = svc.context.rules.iter().collect();
        sat_check(&mut r, &rules, ViolationKind::ContextConflict, "context rules conflict");
        let legal: Vec<&Expr> = legal.iter().collect();
        sat_check(&mut r, &legal, ViolationKind::LegalConflict, "legal rules conflict");
    }

    if let Some(p) = &nf.price {
        match p.amount.check_numeric(svc) {
            Err(err) => r.push(ViolationKind::IllTyped, format!("price amount: {err}")),
            Ok(()) if well_typed => {
                let neg = Expr::bin(BinOp::Lt, p.amount.clone(), Expr::int(0));
                let mut cs: Vec<&Expr> = vec![&neg];
                for v in p.amount.vars() {
                    cs.push(&svc.params[&v].constraint);
                }
                match constraints_jointly_satisfiable(cs.iter().copied(), &service_domains(svc, &cs)) {
                    Ok(Some(w)) => r.push(
                        ViolationKind::NegativePrice,
                        format!("price amount {} can be negative (e.g. {})", p.amount, fmt_witness(&w)),
                    ),
                    Ok(None) => {}
                    Err(e) => r.push(ViolationKind::Undecided, format!("price sign: {e}")),
                }
            }
            Ok(()) => {}
        }
        if let Some(per) = &p.per {
            if !svc.params.get(per).is_some_and(|q| q.dtype.is_numeric()) {
                r.push(ViolationKind::Unresolved, format!("price usage `{per}` is not a numeric parameter"));
            }
        }
    }

    if let Some(tr) = &nf.trust {
        for (set, recs) in [("ce", &tr.ce), ("re", &tr.re)] {
            for (who, g) in recs {
                if !g.is_valid() {
                    r.push(
                        ViolationKind::TrustRange,
                        format!("trust grade {g} for `{who}` in {set} is outside 1..5"),
                    );
                }
            }
        }
    }

    r.out
}

fn fmt_witness(w: &indexmap::IndexMap<String, Value>) -> String {
    w.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

fn sat_check(r: &mut Report<'_>, cs: &[&Expr], kind: ViolationKind, what: &str) {
    if cs.is_empty() {
        return;
    }
    let doms = service_domains(r.svc, cs);
    match constraints_jointly_satisfiable(cs.iter().copied(), &doms) {
        Ok(Some(_)) => {}
        Ok(None) => r.push(kind, format!("{what}: {}", render(cs))),
        Err(e) => r.push(ViolationKind::Undecided, format!("{what}: {e}")),
    }
}

/// Outcome of matching a provider's context rules against a requester.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleCheck {
    pub holds: bool,
    pub diagnostics: Vec<String>,
}

/// True iff every rule evaluates to true against the requester context. A
/// rule over a dimension the requester lacks counts as unsatisfied.
pub fn context_rules_hold(ctx: &Context, requester: &ContextInfo) -> RuleCheck {
    let env = Environment {
        bindings: Default::default(),
        requester: requester.clone(),
    };
    let mut holds = true;
    let mut diagnostics = Vec::new();
    for rule in &ctx.rules {
        match eval_bool(rule, &env) {
            Ok(true) => {}
            Ok(false) => holds = false,
            Err(EvalError::UnboundDimension(d)) => {
                holds = false;
                diagnostics.push(format!("rule `{rule}`: requester has no `{d}`"));
            }
            Err(e) => {
                holds = false;
                diagnostics.push(format!("rule `{rule}`: {e}"));
            }
        }
    }
    RuleCheck { holds, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::specfile::parse_service_spec;
    use crate::model::service::TrustGrade;

    const BASE: &str = r#"
service Shop {
  parameters {
    deposit: double input;
    CarType: enum CarKind { toyota, honda } input;
    numberOfHours: int output where numberOfHours >= 0;
  }
  context {
    dimensions { membership: enum Membership { caa, aaa }; }
    rules { ctx.membership == caa; }
  }
  contract {
    function {
      name = "Reserve"; inputs = [deposit, CarType]; address = "X";
      result_name = "R"; outputs = [numberOfHours];
    }
    nonfunctional {
      price { amount = 60*numberOfHours; currency = dollar; unit = oneTime; }
      trust { ce { alice = 4; } pg = true; re {} }
    }
    legal { deposit := 300; CarType == toyota; }
  }
}
"#;

    fn kinds(s: &ConfiguredService) -> Vec<ViolationKind> {
        validate_service(s).into_iter().map(|v| v.kind).collect()
    }

    #[test]
    fn clean_fixture() {
        let s = parse_service_spec(BASE).unwrap();
        assert_eq!(validate_service(&s), []);
    }

    #[test]
    fn conflicting_legal_rules() {
        let s = parse_service_spec(&BASE.replace("CarType == toyota;", "deposit == 400;")).unwrap();
        assert_eq!(kinds(&s), [ViolationKind::LegalConflict]);
    }

    #[test]
    fn trust_grade_out_of_range() {
        let mut s = parse_service_spec(BASE).unwrap();
        let tr = s.contract.nonfunctional.trust.as_mut().unwrap();
        tr.ce.insert("bob".into(), TrustGrade(7));
        assert_eq!(kinds(&s), [ViolationKind::TrustRange]);
    }

    #[test]
    fn unconstrained_usage_can_make_price_negative() {
        let s = parse_service_spec(&BASE.replace(" where numberOfHours >= 0", "")).unwrap();
        assert_eq!(kinds(&s), [ViolationKind::NegativePrice]);
    }

    #[test]
    fn contradictory_context_rules() {
        let s = parse_service_spec(&BASE.replace(
            "ctx.membership == caa;",
            "ctx.membership == caa; ctx.membership == aaa;",
        ))
        .unwrap();
        assert_eq!(kinds(&s), [ViolationKind::ContextConflict]);
    }

    #[test]
    fn signature_must_use_declared_directions() {
        let mut s = parse_service_spec(BASE).unwrap();
        s.contract.function.outputs.insert("deposit".into());
        assert_eq!(kinds(&s), [ViolationKind::Signature]);
    }

    #[test]
    fn ill_typed_legal_rule() {
        let mut s = parse_service_spec(BASE).unwrap();
        s.contract.legal.insert(LegalRule::Check(Expr::bin(
            BinOp::Eq,
            Expr::var("deposit"),
            Expr::Lit(Value::Bool(true)),
        )));
        assert_eq!(kinds(&s), [ViolationKind::IllTyped]);
    }

    #[test]
    fn empty_enum() {
        let s = parse_service_spec(&BASE.replace("enum Membership { caa, aaa }", "enum Membership {}")
            .replace("rules { ctx.membership == caa; }", ""))
        .unwrap();
        assert_eq!(kinds(&s), [ViolationKind::EnumValues]);
    }

    fn ctx(rules: &[&str]) -> Context {
        let mut c = Context::default();
        for r in rules {
            c.rules.insert(crate::model::expr::parse_expr(r).unwrap());
        }
        c
    }

    fn requester(pairs: &[(&str, Value)]) -> ContextInfo {
        let mut info = ContextInfo::default();
        for (d, v) in pairs {
            info.entries.insert(d.to_string(), v.clone());
        }
        info
    }

    #[test]
    fn context_rules_against_requesters() {
        let c = ctx(&["ctx.membership == caa"]);
        // the free-scope parser reads `caa` as a variable; compare tags directly
        let c = Context {
            rules: c
                .rules
                .into_iter()
                .map(|_| Expr::bin(BinOp::Eq, Expr::Ctx("membership".into()), Expr::Lit(Value::Sym("caa".into()))))
                .collect(),
            ..c
        };
        let caa = requester(&[("membership", Value::Sym("caa".into()))]);
        let aaa = requester(&[("membership", Value::Sym("aaa".into()))]);
        assert!(context_rules_hold(&c, &caa).holds);
        assert!(!context_rules_hold(&c, &aaa).holds);
        let missing = context_rules_hold(&c, &ContextInfo::default());
        assert!(!missing.holds);
        assert_eq!(missing.diagnostics.len(), 1);
        assert!(context_rules_hold(&Context::default(), &aaa).holds);
    }
}
