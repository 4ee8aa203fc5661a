use std::fmt;

use indexmap::{IndexMap, IndexSet};

use super::expr::TaExpr;
use super::lower::Lower;
use super::network::path_var;
use super::{Bindings, Network, TaGenError, VarRole, IDLE, MAIN};
use crate::composition::{one_time_amount, CompositionResult};
use crate::model::{
    eval, BinOp, Catalog, DataType, Direction, Environment, EvalError, LegalRule, Parameter, Value,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryCategory {
    Reachability,
    Context,
    Input,
    Output,
    Precondition,
    Postcondition,
    Nonfunctional,
    Legal,
}

impl QueryCategory {
    pub const ALL: [QueryCategory; 8] = [
        QueryCategory::Reachability,
        QueryCategory::Context,
        QueryCategory::Input,
        QueryCategory::Output,
        QueryCategory::Precondition,
        QueryCategory::Postcondition,
        QueryCategory::Nonfunctional,
        QueryCategory::Legal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QueryCategory::Reachability => "reachability",
            QueryCategory::Context => "context",
            QueryCategory::Input => "input",
            QueryCategory::Output => "output",
            QueryCategory::Precondition => "precondition",
            QueryCategory::Postcondition => "postcondition",
            QueryCategory::Nonfunctional => "nonfunctional",
            QueryCategory::Legal => "legal",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        QueryCategory::ALL.into_iter().find(|c| c.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryForm {
    /// `E<> φ`
    Exists(TaExpr),
    /// `A[] φ imply ψ`
    Always { ante: TaExpr, cons: TaExpr },
}

impl fmt::Display for QueryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryForm::Exists(p) => write!(f, "E<> {p}"),
            QueryForm::Always { ante, cons } => write!(f, "A[] {ante} imply {cons}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub category: QueryCategory,
    pub form: QueryForm,
    /// Exact text written to the query file.
    pub text: String,
}

impl Query {
    pub fn new(category: QueryCategory, form: QueryForm) -> Self {
        Query {
            category,
            text: form.to_string(),
            form,
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn always(category: QueryCategory, location: &str, cons: TaExpr) -> Query {
    Query::new(
        category,
        QueryForm::Always {
            ante: TaExpr::loc(MAIN, location),
            cons,
        },
    )
}

fn bound_error(what: &str) -> impl Fn(EvalError) -> TaGenError + '_ {
    move |source| match source {
        EvalError::Unbound(n) => TaGenError::MissingBinding(n),
        source => TaGenError::Bound {
            what: what.to_string(),
            source,
        },
    }
}

/// The query suite for `net`: reachability of every final location, then
/// context, input, output, pre/postcondition, nonfunctional, and legal
/// checks. Composite bounds are evaluated under `bindings`.
pub fn gen_queries(
    res: &CompositionResult,
    net: &Network,
    catalog: &Catalog,
    bindings: &Bindings,
) -> Result<Vec<Query>, TaGenError> {
    let d = &net.decls;
    let params: IndexMap<String, Parameter> = d
        .vars
        .iter()
        .filter(|v| v.role == VarRole::Parameter)
        .map(|v| (v.name.clone(), Parameter::new(v.name.clone(), v.dtype.clone(), Direction::Input)))
        .collect();
    let dims: IndexMap<String, DataType> =
        d.requester.iter().map(|f| (f.name.clone(), f.dtype.clone())).collect();
    let consts: IndexMap<String, i64> = d.consts.iter().map(|c| (c.name.clone(), c.value)).collect();
    let mut enc = d.encoding.clone();
    let mut lower = Lower {
        params: &params,
        dims: &dims,
        consts: &consts,
        enc: &mut enc,
    };
    let declared = |n: &str| d.var(n).is_some();

    let comp = &res.composite;
    let cf = comp.function();
    let finals: Vec<String> = (1..=res.per_flow.len()).map(|j| format!("Final_{j}")).collect();
    let mut out = Vec::new();

    use QueryCategory::*;
    for fin in &finals {
        out.push(Query::new(Reachability, QueryForm::Exists(TaExpr::loc(MAIN, fin))));
    }
    for r in &comp.context.rules {
        out.push(always(Context, IDLE, lower.expr(r)?));
    }
    for i in &cf.inputs {
        let b = format!("{i}B");
        if declared(&b) {
            out.push(always(Input, IDLE, TaExpr::Var(b)));
        }
    }
    for o in &cf.outputs {
        let b = format!("{o}B");
        if declared(&b) {
            out.push(always(Output, IDLE, TaExpr::not(TaExpr::Var(b))));
        }
    }
    for ((_, s), fin) in res.per_flow.iter().zip(&finals) {
        for o in &s.function().outputs {
            let b = format!("{o}B");
            if declared(&b) {
                out.push(always(Output, fin, TaExpr::Var(b)));
            }
        }
    }
    for c in cf.pre.iter().filter(|c| !res.lifted_guards.contains(*c)) {
        out.push(always(Precondition, IDLE, lower.expr(c)?));
    }
    for ((_, s), fin) in res.per_flow.iter().zip(&finals) {
        for c in s.function().post.iter().filter(|c| c.as_flag().is_some()) {
            out.push(always(Postcondition, fin, lower.expr(c)?));
        }
    }

    let env = Environment {
        bindings: bindings.clone(),
        ..Environment::default()
    };
    let nf = comp.nonfunctional();
    let mut bounds: Vec<(&str, BinOp, i64)> = Vec::new();
    if let Some(p) = &nf.price {
        let amount = one_time_amount(p).map_err(|_| TaGenError::PriceUnit(p.unit.clone()))?;
        let v = eval(&amount, &env).map_err(bound_error("price"))?;
        bounds.push(("Price", BinOp::Le, lower.enc.encode("price", &v, &DataType::Double)?));
    }
    if let Some(t) = nf.safety_time {
        bounds.push(("Time", BinOp::Le, t as i64));
    }
    if let Some(a) = nf.availability {
        bounds.push(("Availability", BinOp::Le, a as i64));
    }
    if let Some(r) = nf.reliability {
        bounds.push(("Reliability", BinOp::Ge, r as i64));
    }
    for (j, fin) in finals.iter().enumerate() {
        for (what, op, b) in &bounds {
            let var = path_var(j + 1, what);
            let form = QueryForm::Always {
                ante: TaExpr::loc(MAIN, fin),
                cons: TaExpr::bin(*op, TaExpr::var(var.clone()), TaExpr::Int(*b)),
            };
            out.push(Query {
                category: Nonfunctional,
                text: format!("A[] {MAIN}.{fin} imply {var} {} {b}", op.symbol()),
                form,
            });
        }
    }

    for ((flow, _), fin) in res.per_flow.iter().zip(&finals) {
        let mut env = env.clone();
        let mut targets: IndexSet<String> = IndexSet::new();
        let mut flags: IndexSet<String> = IndexSet::new();
        for step in &flow.steps {
            let s = catalog
                .get(&step.service)
                .ok_or_else(|| TaGenError::UnknownService(step.service.clone()))?;
            let mut m = 0;
            for r in &s.contract.legal {
                match r {
                    LegalRule::Effect { target, value } => {
                        let v = eval(value, &env).map_err(bound_error(target))?;
                        env.bindings.insert(target.clone(), v);
                        targets.insert(target.clone());
                    }
                    LegalRule::Check(_) => {
                        m += 1;
                        flags.insert(format!("{}Legal{m}", s.name));
                    }
                }
            }
        }
        for t in targets {
            let dtype = params
                .get(&t)
                .map(|p| p.dtype.clone())
                .ok_or_else(|| TaGenError::UnknownName(t.clone()))?;
            if !dtype.is_numeric() {
                continue;
            }
            let v: &Value = &env.bindings[&t];
            let b = lower.enc.encode(&t, v, &dtype)?;
            out.push(always(
                Legal,
                fin,
                TaExpr::bin(BinOp::Ge, TaExpr::Int(b), TaExpr::Var(t)),
            ));
        }
        for f in flags {
            out.push(always(Legal, fin, TaExpr::Var(f)));
        }
    }
    Ok(out)
}
