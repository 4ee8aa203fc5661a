use indexmap::{IndexMap, IndexSet};
use rayon::prelude::*;

use super::seq::{check_legal, merge_context, one_time_amount, seq_compose, Composed, SeqOptions};
use super::{CompositionError, CompositionExpr};
use crate::flatten::{flatten, Flow};
use crate::model::{
    BinOp, Catalog, ConfiguredService, DataType, Direction, Expr, Nonfunctional, Parameter, Price,
    ProviderTrust, Recommendations, ServiceFunction, Value, ONE_TIME,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposeOptions {
    pub seq: SeqOptions,
    pub unroll: u32,
    /// Parameter values used when composite bounds must be evaluated.
    pub bindings: IndexMap<String, Value>,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            seq: SeqOptions::default(),
            unroll: 1,
            bindings: IndexMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionResult {
    pub services: Vec<String>,
    pub flow_expr: CompositionExpr,
    pub composite: ConfiguredService,
    pub per_flow: Vec<(Flow, ConfiguredService)>,
    /// Conditions from conditional choice and iteration that were added to
    /// preconditions.
    pub lifted_guards: IndexSet<Expr>,
    pub warnings: Vec<String>,
}

/// Adds `guards` to the precondition of `s`, declaring any name the
/// service lacks as an input parameter.
fn lift_guards(s: &mut ConfiguredService, guards: &[Expr], catalog: &Catalog) {
    for g in guards {
        for v in g.vars() {
            if !s.params.contains_key(&v) {
                let t = catalog.param_type(&v).cloned().unwrap_or(DataType::Bool);
                s.params.insert(v.clone(), Parameter::new(v, t, Direction::Input));
            }
        }
        s.contract.function.pre.insert(g.clone());
    }
}

/// Left fold of sequential composition along the steps of `flow`, with
/// step guards lifted into the participants' preconditions.
pub fn compose_along_flow(
    flow: &Flow,
    catalog: &Catalog,
    opts: &SeqOptions,
) -> Result<Composed, CompositionError> {
    let mut acc: Option<Composed> = None;
    let last = flow.steps.len().checked_sub(1).ok_or(CompositionError::EmptyFlow)?;
    for (i, step) in flow.steps.iter().enumerate() {
        let mut s = catalog
            .get(&step.service)
            .cloned()
            .ok_or_else(|| CompositionError::UnknownService(step.service.clone()))?;
        lift_guards(&mut s, &step.guards, catalog);
        if i == last {
            lift_guards(&mut s, &flow.exit_guards, catalog);
        }
        acc = Some(match acc {
            None => Composed {
                service: s,
                warnings: Vec::new(),
            },
            Some(prev) => {
                let mut next = seq_compose(&prev.service, &s, opts)?;
                let mut w = prev.warnings;
                w.append(&mut next.warnings);
                next.warnings = w;
                next
            }
        });
    }
    Ok(acc.expect("flow has steps"))
}

fn max_opt(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    }
}

fn min_opt(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

fn worst_price(a: &Price, b: &Price) -> Result<Price, CompositionError> {
    if a.currency != b.currency {
        return Err(CompositionError::CurrencyMismatch {
            left: a.currency.clone(),
            right: b.currency.clone(),
        });
    }
    if a.amount == b.amount && a.unit == b.unit {
        return Ok(a.clone());
    }
    let (la, lb, unit, per) = if a.unit == b.unit {
        let per = if a.per == b.per { a.per.clone() } else { None };
        (a.amount.clone(), b.amount.clone(), a.unit.clone(), per)
    } else {
        (one_time_amount(a)?, one_time_amount(b)?, ONE_TIME.to_string(), None)
    };
    Ok(Price {
        amount: Expr::bin(BinOp::Max, la, lb).simplify(),
        currency: a.currency.clone(),
        unit,
        per,
    })
}

fn meet_recs(a: &Recommendations, b: &Recommendations) -> Recommendations {
    let mut out = a.clone();
    for (who, g) in b {
        out.entry(who.clone()).and_modify(|x| *x = x.meet(*g)).or_insert(*g);
    }
    out
}

fn union<T: Clone + std::hash::Hash + Eq>(
    x: &Option<IndexSet<T>>,
    y: &Option<IndexSet<T>>,
) -> Option<IndexSet<T>> {
    match (x, y) {
        (Some(p), Some(q)) => Some(p.iter().chain(q.iter()).cloned().collect()),
        (p, q) => p.clone().or_else(|| q.clone()),
    }
}

fn worst_case(a: &Nonfunctional, b: &Nonfunctional) -> Result<Nonfunctional, CompositionError> {
    let price = match (&a.price, &b.price) {
        (Some(x), Some(y)) => Some(worst_price(x, y)?),
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    let trust = match (&a.trust, &b.trust) {
        (Some(x), Some(y)) => Some(ProviderTrust {
            ce: meet_recs(&x.ce, &y.ce),
            pg: x.pg && y.pg,
            re: meet_recs(&x.re, &y.re),
        }),
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    Ok(Nonfunctional {
        safety_time: max_opt(a.safety_time, b.safety_time),
        safety_data: union(&a.safety_data, &b.safety_data),
        security: union(&a.security, &b.security),
        reliability: min_opt(a.reliability, b.reliability),
        availability: max_opt(a.availability, b.availability),
        price,
        trust,
    })
}

/// Merges per-flow composites into one contract that bounds every flow.
fn merge_flows(
    flows: &[ConfiguredService],
    lifted: &IndexSet<Expr>,
) -> Result<(ConfiguredService, Vec<String>), CompositionError> {
    let mut warnings = Vec::new();
    let first = &flows[0];
    let mut f = ServiceFunction::new(
        flows.iter().map(|s| s.function().name.as_str()).collect::<IndexSet<_>>().into_iter().collect::<Vec<_>>().join(" | "),
        flows.iter().map(|s| s.function().result_name.as_str()).collect::<IndexSet<_>>().into_iter().collect::<Vec<_>>().join(" | "),
    );
    let mut params: IndexMap<String, Parameter> = IndexMap::new();
    let mut attrs = IndexMap::new();
    let mut context = first.context.clone();
    let mut nf = first.nonfunctional().clone();
    let mut legal = IndexSet::new();
    f.post = first.function().post.clone();
    for (k, s) in flows.iter().enumerate() {
        for p in s.params.values() {
            match params.get_mut(&p.name) {
                None => {
                    params.insert(p.name.clone(), p.clone());
                }
                Some(prev) => {
                    if prev.dtype != p.dtype {
                        return Err(CompositionError::ParamTypeConflict {
                            name: p.name.clone(),
                            left: prev.dtype.to_string(),
                            right: p.dtype.to_string(),
                        });
                    }
                    let input = prev.direction.is_input() || p.direction.is_input();
                    let output = prev.direction.is_output() || p.direction.is_output();
                    prev.direction = match (input, output) {
                        (true, true) => Direction::InOut,
                        (false, true) => Direction::Output,
                        _ => Direction::Input,
                    };
                }
            }
        }
        for (n, a) in &s.attrs {
            attrs.insert(n.clone(), a.clone());
        }
        let sf = s.function();
        f.inputs.extend(sf.inputs.iter().cloned());
        f.outputs.extend(sf.outputs.iter().cloned());
        f.addresses.extend(sf.addresses.iter().cloned());
        f.pre.extend(sf.pre.iter().filter(|c| !lifted.contains(*c)).cloned());
        f.post.retain(|c| sf.post.contains(c));
        legal.extend(s.contract.legal.iter().cloned());
        if k > 0 {
            let (merged, w) = merge_context(&context, &s.context)?;
            context = merged;
            warnings.extend(w);
            nf = worst_case(&nf, s.nonfunctional())?;
        }
    }
    let name = flows.iter().map(|s| s.name.as_str()).collect::<IndexSet<_>>().into_iter().collect::<Vec<_>>().join(" | ");
    let mut out = ConfiguredService::new(name, f);
    out.params = params;
    out.attrs = attrs;
    out.context = context;
    out.contract.nonfunctional = nf;
    out.contract.legal = legal;
    check_legal(&out)?;
    Ok((out, warnings))
}

/// Flattens `expr`, composes each flow, and bounds all flows by one
/// worst-case composite.
pub fn compose(
    expr: &CompositionExpr,
    catalog: &Catalog,
    opts: &ComposeOptions,
) -> Result<CompositionResult, CompositionError> {
    let flows = flatten(expr, opts.unroll, catalog)?;
    if flows.is_empty() {
        return Err(CompositionError::EmptyFlowSet);
    }
    let composed: Vec<Composed> = flows
        .par_iter()
        .map(|f| compose_along_flow(f, catalog, &opts.seq))
        .collect::<Result<_, _>>()?;

    let lifted: IndexSet<Expr> = flows.iter().flat_map(|f| f.all_guards()).collect();
    let mut warnings: Vec<String> = Vec::new();
    for c in &composed {
        for w in &c.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    let services: Vec<ConfiguredService> = composed.iter().map(|c| c.service.clone()).collect();
    let composite = if services.len() == 1 {
        services[0].clone()
    } else {
        let (c, w) = merge_flows(&services, &lifted)?;
        warnings.extend(w);
        c
    };
    Ok(CompositionResult {
        services: expr.services(),
        flow_expr: expr.clone(),
        composite,
        per_flow: flows.into_iter().zip(services).collect(),
        lifted_guards: lifted,
        warnings,
    })
}
