//! Reference checker for tests: enumerates the whole product graph over
//! name-keyed states and evaluates the query on every reachable state.

use std::collections::{BTreeMap, BTreeSet};

use super::{initial_values, CheckError, Outcome, Verdict};
use crate::model::ContextInfo;
use crate::tagen::{Bindings, Edge, Network, Query, QueryForm, SyncDir, TaExpr, Template, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct State {
    /// Instance name to location id.
    at: BTreeMap<String, String>,
    /// Global variables by name and clocks as `instance.clock`.
    vals: BTreeMap<String, i64>,
    fields: BTreeMap<String, i64>,
}

struct View<'a> {
    net: &'a Network,
    s: &'a State,
    /// Instance whose clocks are visible by their bare names.
    scope: Option<&'a str>,
}

impl Valuation for View<'_> {
    fn var(&self, name: &str) -> Option<i64> {
        if let Some(p) = self.scope {
            if let Some(v) = self.s.vals.get(&format!("{p}.{name}")) {
                return Some(*v);
            }
        }
        if let Some(v) = self.s.vals.get(name) {
            return Some(*v);
        }
        self.net.decls.consts.iter().find(|c| c.name == name).map(|c| c.value)
    }

    fn field(&self, name: &str) -> Option<i64> {
        self.s.fields.get(name).copied()
    }

    fn at(&self, process: &str, location: &str) -> Option<bool> {
        if let Some(v) = self.s.vals.get(&format!("{process}.{location}")) {
            return Some(*v != 0);
        }
        let t = self.net.instance(process)?;
        t.location(location)?;
        Some(self.s.at.get(process).map(String::as_str) == Some(location))
    }
}

fn eval(net: &Network, s: &State, scope: Option<&str>, e: &TaExpr) -> Result<i64, CheckError> {
    e.eval(&View { net, s, scope }).map_err(CheckError::UnknownReference)
}

fn guard_ok(net: &Network, s: &State, inst: &str, e: &Edge) -> Result<bool, CheckError> {
    for g in &e.guard.0 {
        if eval(net, s, Some(inst), g)? == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn fire(net: &Network, s: &mut State, inst: &str, t: &Template, e: &Edge, cap: i64) -> Result<(), CheckError> {
    for u in &e.updates {
        let v = eval(net, s, Some(inst), &u.value)?;
        if t.clocks.contains(&u.target) {
            s.vals.insert(format!("{inst}.{}", u.target), v.clamp(0, cap));
        } else {
            let v = match net.decls.var(&u.target) {
                Some(d) if d.is_bool() => (v != 0) as i64,
                Some(_) => v,
                None => return Err(CheckError::UnknownReference(u.target.clone())),
            };
            s.vals.insert(u.target.clone(), v);
        }
    }
    s.at.insert(inst.to_string(), e.target.clone());
    Ok(())
}

fn invariants_ok(net: &Network, s: &State) -> bool {
    net.system.iter().all(|(inst, _)| {
        let t = net.instance(inst).expect("instances resolve");
        match &t.location(&s.at[inst]).expect("location exists").invariant {
            Some(b) => s.vals[&format!("{inst}.{}", b.clock)] <= b.bound,
            None => true,
        }
    })
}

fn next_states(net: &Network, s: &State, cap: i64) -> Result<Vec<State>, CheckError> {
    let procs: Vec<(&str, &Template)> = net
        .system
        .iter()
        .map(|(i, _)| (i.as_str(), net.instance(i).expect("instances resolve")))
        .collect();
    let committed = |inst: &str, t: &Template| t.location(&s.at[inst]).is_some_and(|l| l.committed);
    let any_committed = procs.iter().any(|(i, t)| committed(i, t));
    let mut out = Vec::new();

    if !any_committed {
        let mut d = s.clone();
        for (inst, t) in &procs {
            for c in &t.clocks {
                let k = format!("{inst}.{c}");
                let v = d.vals[&k];
                d.vals.insert(k, (v + 1).min(cap));
            }
        }
        if invariants_ok(net, &d) {
            out.push(d);
        }
    }

    for (pi, t) in &procs {
        for e in t.edges.iter().filter(|e| e.source == s.at[*pi]) {
            if !guard_ok(net, s, pi, e)? {
                continue;
            }
            match &e.sync {
                None => {
                    if any_committed && !committed(pi, t) {
                        continue;
                    }
                    let mut n = s.clone();
                    fire(net, &mut n, pi, t, e, cap)?;
                    if invariants_ok(net, &n) {
                        out.push(n);
                    }
                }
                Some(sync) if sync.dir == SyncDir::Send => {
                    for (qi, u) in &procs {
                        if qi == pi {
                            continue;
                        }
                        if any_committed && !committed(pi, t) && !committed(qi, u) {
                            continue;
                        }
                        for f in u.edges.iter().filter(|f| f.source == s.at[*qi]) {
                            let matches = f
                                .sync
                                .as_ref()
                                .is_some_and(|r| r.dir == SyncDir::Receive && r.channel == sync.channel);
                            if !matches || !guard_ok(net, s, qi, f)? {
                                continue;
                            }
                            let mut n = s.clone();
                            fire(net, &mut n, pi, t, e, cap)?;
                            fire(net, &mut n, qi, u, f, cap)?;
                            if invariants_ok(net, &n) {
                                out.push(n);
                            }
                        }
                    }
                }
                Some(_) => {}
            }
        }
    }
    Ok(out)
}

/// Verdict for `q` computed by exhaustive enumeration of at most `cap`
/// states. Never returns a trace.
pub fn brute_force_oracle(
    net: &Network,
    q: &Query,
    requester: &ContextInfo,
    bindings: &Bindings,
    cap: usize,
) -> Result<Verdict, CheckError> {
    let mut v = brute_force_oracle_all(net, std::slice::from_ref(q), requester, bindings, cap)?;
    Ok(v.remove(0))
}

/// [`brute_force_oracle`] for several queries over one enumeration.
pub fn brute_force_oracle_all(
    net: &Network,
    queries: &[Query],
    requester: &ContextInfo,
    bindings: &Bindings,
    cap: usize,
) -> Result<Vec<Verdict>, CheckError> {
    let iv = initial_values(net, requester, bindings)?;
    let clock_cap = net
        .templates
        .iter()
        .flat_map(|t| &t.locations)
        .filter_map(|l| l.invariant.as_ref())
        .map(|b| b.bound)
        .max()
        .unwrap_or(0)
        + 1;
    let mut init = State {
        at: BTreeMap::new(),
        vals: iv.vars.into_iter().collect(),
        fields: iv.fields.into_iter().collect(),
    };
    for (inst, _) in &net.system {
        let t = net
            .instance(inst)
            .ok_or_else(|| CheckError::UnknownReference(inst.clone()))?;
        init.at.insert(inst.clone(), t.initial.clone());
        for c in &t.clocks {
            init.vals.insert(format!("{inst}.{c}"), 0);
        }
    }

    let mut seen: BTreeSet<State> = BTreeSet::new();
    let mut work = vec![init];
    while let Some(s) = work.pop() {
        if seen.contains(&s) {
            continue;
        }
        if seen.len() >= cap {
            return Err(CheckError::CapExceeded(cap));
        }
        for n in next_states(net, &s, clock_cap)? {
            if !seen.contains(&n) {
                work.push(n);
            }
        }
        seen.insert(s);
    }

    let truth = |s: &State, e: &TaExpr| eval(net, s, None, e).map(|v| v != 0);
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let holds = match &q.form {
            QueryForm::Exists(p) => {
                let mut any = false;
                for s in &seen {
                    any |= truth(s, p)?;
                }
                any
            }
            QueryForm::Always { ante, cons } => {
                let mut all = true;
                for s in &seen {
                    if truth(s, ante)? && !truth(s, cons)? {
                        all = false;
                    }
                }
                all
            }
        };
        out.push(Verdict {
            outcome: if holds { Outcome::Pass } else { Outcome::Fail },
            trace: None,
            states: seen.len(),
            bound_hit: false,
        });
    }
    Ok(out)
}
