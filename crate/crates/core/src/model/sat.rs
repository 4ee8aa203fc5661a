//! Finite-domain satisfiability by exhaustive enumeration.

use indexmap::IndexMap;
use thiserror::Error;

use super::expr::{eval_bool, Environment, EvalError, Expr};
use super::types::Value;

/// Candidate values per name. Context dimensions are keyed `ctx.<dim>`.
pub type Domains = IndexMap<String, Vec<Value>>;

/// A satisfying assignment, in the order names were first referenced.
pub type Witness = IndexMap<String, Value>;

/// Enumeration stops with an error past this many rows.
pub const MAX_ROWS: u64 = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("no domain declared for `{0}`")]
    NoDomain(String),
    #[error("search space of {0} rows exceeds the enumeration cap")]
    TooLarge(u64),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

fn referenced(cs: &[&Expr]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for c in cs {
        c.walk(&mut |e| {
            let key = match e {
                Expr::Var(v) => v.clone(),
                Expr::Ctx(d) => format!("ctx.{d}"),
                _ => return,
            };
            if !names.contains(&key) {
                names.push(key);
            }
        });
    }
    names
}

fn assign(env: &mut Environment, key: &str, v: &Value) {
    match key.strip_prefix("ctx.") {
        Some(dim) => {
            env.requester.entries.insert(dim.to_string(), v.clone());
        }
        None => {
            env.bindings.insert(key.to_string(), v.clone());
        }
    }
}

/// Searches the cross product of the domains of every referenced name for
/// a row satisfying all of `cs`. Rows are visited in lexicographic order
/// of domain positions, so the witness is the first satisfying row.
pub fn constraints_jointly_satisfiable<'a>(
    cs: impl IntoIterator<Item = &'a Expr>,
    domains: &Domains,
) -> Result<Option<Witness>, SatError> {
    let cs: Vec<&Expr> = cs.into_iter().collect();
    let names = referenced(&cs);
    let mut doms: Vec<&[Value]> = Vec::with_capacity(names.len());
    let mut rows: u64 = 1;
    for n in &names {
        let d = domains.get(n).ok_or_else(|| SatError::NoDomain(n.clone()))?;
        if d.is_empty() {
            return Ok(None);
        }
        rows = rows.saturating_mul(d.len() as u64);
        doms.push(d);
    }
    if rows > MAX_ROWS {
        return Err(SatError::TooLarge(rows));
    }

    let mut idx = vec![0usize; names.len()];
    let mut env = Environment::default();
    loop {
        for (k, n) in names.iter().enumerate() {
            assign(&mut env, n, &doms[k][idx[k]]);
        }
        let mut ok = true;
        for c in &cs {
            if !eval_bool(c, &env)? {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(
                names
                    .iter()
                    .enumerate()
                    .map(|(k, n)| (n.clone(), doms[k][idx[k]].clone()))
                    .collect(),
            ));
        }
        // odometer increment, last name fastest
        let mut k = names.len();
        loop {
            if k == 0 {
                return Ok(None);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < doms[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}
