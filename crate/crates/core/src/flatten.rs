//! Flattening of composition expressions into purely sequential flows.

use std::fmt;

use indexmap::IndexSet;
use thiserror::Error;

use crate::composition::{CompOp, CompositionExpr};
use crate::model::sat::{constraints_jointly_satisfiable, Domains};
use crate::model::validate::{collect_literals, domain_for};
use crate::model::{Catalog, DataType, Expr};

/// Upper limit on the number of flows one expression may denote.
pub const MAX_FLOWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowStep {
    pub service: String,
    /// Conditions from conditional choice and iteration that guard entry.
    pub guards: Vec<Expr>,
    /// Set on steps sequenced after another member of a parallel group.
    pub parallel_tail: bool,
    /// 1-based repetition number inside an unrolled loop, 0 elsewhere.
    pub iteration_index: u32,
    pub priority_rank: Option<u32>,
}

impl FlowStep {
    pub fn new(service: impl Into<String>) -> Self {
        FlowStep {
            service: service.into(),
            guards: Vec::new(),
            parallel_tail: false,
            iteration_index: 0,
            priority_rank: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Flow {
    pub steps: Vec<FlowStep>,
    /// Guards that must hold when the flow ends, e.g. a loop condition that
    /// is false on the zero-iteration path with nothing after it.
    pub exit_guards: Vec<Expr>,
}

impl Flow {
    pub fn services(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.service.as_str())
    }

    /// Every guard of the flow, step guards first.
    pub fn all_guards(&self) -> IndexSet<Expr> {
        self.steps
            .iter()
            .flat_map(|s| s.guards.iter())
            .chain(self.exit_guards.iter())
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlattenError {
    #[error("unroll bound must be at least 1")]
    ZeroUnroll,
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("expression denotes more than {MAX_FLOWS} flows")]
    TooManyFlows,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Item {
    Step(FlowStep),
    Guard(Expr),
}

type Partial = Vec<Item>;

fn cross(a: &[Partial], b: &[Partial]) -> Result<Vec<Partial>, FlattenError> {
    if a.len().saturating_mul(b.len()) > MAX_FLOWS {
        return Err(FlattenError::TooManyFlows);
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut v = x.clone();
            v.extend(y.iter().cloned());
            out.push(v);
        }
    }
    Ok(out)
}

fn chain(e: &CompositionExpr, op: CompOp, out: &mut Vec<CompositionExpr>) {
    match e {
        CompositionExpr::Binary(o, l, r) if *o == op => {
            chain(l, op, out);
            out.push((**r).clone());
        }
        other => out.push(other.clone()),
    }
}

/// Index permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

fn orders(
    units: &[Vec<Partial>],
    mark_tails: bool,
) -> Result<Vec<Partial>, FlattenError> {
    let mut out = Vec::new();
    for perm in permutations(units.len()) {
        let mut acc: Vec<Partial> = vec![Vec::new()];
        for (pos, &u) in perm.iter().enumerate() {
            let mut flows = units[u].clone();
            if mark_tails && pos > 0 {
                for f in &mut flows {
                    if let Some(Item::Step(s)) = f.iter_mut().find(|i| matches!(i, Item::Step(_))) {
                        s.parallel_tail = true;
                    }
                }
            }
            acc = cross(&acc, &flows)?;
        }
        out.extend(acc);
        if out.len() > MAX_FLOWS {
            return Err(FlattenError::TooManyFlows);
        }
    }
    Ok(out)
}

fn go(e: &CompositionExpr, k: u32, cat: &Catalog) -> Result<Vec<Partial>, FlattenError> {
    match e {
        CompositionExpr::Service(n) => {
            if cat.get(n).is_none() {
                return Err(FlattenError::UnknownService(n.clone()));
            }
            Ok(vec![vec![Item::Step(FlowStep::new(n.clone()))]])
        }
        CompositionExpr::Binary(CompOp::Seq, l, r) => cross(&go(l, k, cat)?, &go(r, k, cat)?),
        CompositionExpr::Binary(op, _, _) => {
            let mut operands = Vec::new();
            chain(e, *op, &mut operands);
            let units = operands
                .iter()
                .map(|o| go(o, k, cat))
                .collect::<Result<Vec<_>, _>>()?;
            match op {
                CompOp::Par => orders(&units, true),
                CompOp::NoOrder => orders(&units, false),
                CompOp::NonDet => Ok(units.into_iter().flatten().collect()),
                CompOp::Priority => Ok(units
                    .into_iter()
                    .enumerate()
                    .flat_map(|(rank, flows)| {
                        flows.into_iter().map(move |mut f| {
                            for it in &mut f {
                                if let Item::Step(s) = it {
                                    s.priority_rank.get_or_insert(rank as u32);
                                }
                            }
                            f
                        })
                    })
                    .collect()),
                CompOp::Seq => unreachable!(),
            }
        }
        CompositionExpr::Cond { cond, then, els } => {
            let mut out = Vec::new();
            for (g, branch) in [(cond.clone(), then), (cond.negate(), els)] {
                for f in go(branch, k, cat)? {
                    let mut v = vec![Item::Guard(g.clone())];
                    v.extend(f);
                    out.push(v);
                }
            }
            Ok(out)
        }
        CompositionExpr::Iter { cond, body } => {
            let body = go(body, k, cat)?;
            let mut out = vec![vec![Item::Guard(cond.negate())]];
            let mut acc: Vec<Partial> = vec![Vec::new()];
            for j in 1..=k {
                let round: Vec<Partial> = body
                    .iter()
                    .map(|f| {
                        let mut v = vec![Item::Guard(cond.clone())];
                        v.extend(f.iter().cloned().map(|mut it| {
                            if let Item::Step(s) = &mut it {
                                if s.iteration_index == 0 {
                                    s.iteration_index = j;
                                }
                            }
                            it
                        }));
                        v
                    })
                    .collect();
                acc = cross(&acc, &round)?;
                out.extend(acc.iter().cloned());
                if out.len() > MAX_FLOWS {
                    return Err(FlattenError::TooManyFlows);
                }
            }
            Ok(out)
        }
    }
}

fn finish(p: Partial) -> Flow {
    let mut steps = Vec::new();
    let mut pending: Vec<Expr> = Vec::new();
    for it in p {
        match it {
            Item::Guard(g) => {
                if !pending.contains(&g) {
                    pending.push(g);
                }
            }
            Item::Step(mut s) => {
                for g in s.guards.drain(..) {
                    if !pending.contains(&g) {
                        pending.push(g);
                    }
                }
                s.guards = std::mem::take(&mut pending);
                steps.push(s);
            }
        }
    }
    Flow {
        steps,
        exit_guards: pending,
    }
}

/// All sequential flows denoted by `expr`, with loops unrolled up to `k`
/// times. Flows without steps are dropped and duplicates are removed;
/// the remaining order is the order of generation.
pub fn flatten(expr: &CompositionExpr, k: u32, catalog: &Catalog) -> Result<Vec<Flow>, FlattenError> {
    if k == 0 {
        return Err(FlattenError::ZeroUnroll);
    }
    let mut seen = IndexSet::new();
    for p in go(expr, k, catalog)? {
        let f = finish(p);
        if !f.steps.is_empty() {
            seen.insert(f);
        }
    }
    Ok(seen.into_iter().collect())
}

pub struct Signature<'a>(pub &'a Flow);

impl fmt::Display for Signature<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(if s.parallel_tail { " `>> " } else { " >> " })?;
            }
            for g in &s.guards {
                write!(f, "[{g}]")?;
            }
            f.write_str(&s.service)?;
            if s.iteration_index > 0 {
                write!(f, "{{{}}}", s.iteration_index)?;
            }
        }
        Ok(())
    }
}

/// Canonical text of a flow, e.g. `[c1]A >> C `>> D`.
pub fn flow_signature(f: &Flow) -> String {
    Signature(f).to_string()
}

/// Indices of flows whose guards cannot all hold. Guard names that are not
/// catalog parameters are treated as boolean condition variables.
pub fn vacuous_flows(flows: &[Flow], catalog: &Catalog) -> Vec<usize> {
    flows
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            let guards = f.all_guards();
            let refs: Vec<&Expr> = guards.iter().collect();
            let lits = collect_literals(&refs);
            let mut doms = Domains::new();
            for g in &guards {
                for v in g.vars() {
                    let t = catalog.param_type(&v).cloned().unwrap_or(DataType::Bool);
                    doms.entry(v).or_insert_with(|| domain_for(&t, &lits));
                }
            }
            matches!(constraints_jointly_satisfiable(guards.iter(), &doms), Ok(None))
        })
        .map(|(i, _)| i)
        .collect()
}
